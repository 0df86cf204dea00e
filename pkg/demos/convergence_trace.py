"""Follow DSERA's outer iterations on one drop and print how prices shape it.

    python3 demos/convergence_trace.py
"""
from d2dprice import DseraConfig, GenParams, generate, run_dsera

inst = generate(GenParams(n_cues=6, m_d2d=60, rng_seed=3))
out = run_dsera(inst, DseraConfig(trace=True))
print(f"{'outer':>5} {'cue':>4} {'inner':>5} {'sum rate':>9} {'admitted':>8} {'cue low':>7} {'pair low':>8}")
for row in out.trace[:: max(1, len(out.trace) // 25)]:
    print(f"{row['outer']:5d} {row['cue']:4d} {row['inner_iters']:5d} {row['sum_rate']:9.1f} "
          f"{row['admitted']:8d} {row['cue_violations']:7d} {row['d2d_violations']:8d}")
print(f"final: status={out.status}, sum rate {out.sum_rate:.1f}, "
      f"{out.n_admitted}/{inst.m} admitted, {out.repaired} removed by repair")
