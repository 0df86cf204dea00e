"""A five-drop density sweep comparing the pricing schemes.

    python3 demos/small_sweep.py [out_dir]
"""
import sys

from d2dprice import ExperimentSpec, run_experiment

out_dir = sys.argv[1] if len(sys.argv) > 1 else "results/demo_sweep"
spec = ExperimentSpec(algorithms=("dsera", "scheme3", "scheme2", "scheme1"), axis="density",
                      values=(4, 12, 20), n_cues=10, drops=5, out_dir=out_dir)
report = run_experiment(spec)
for row in report.summary():
    print(f"M/N={row['axis']:>2} {row['algorithm']:>8}: sum rate {row['sum_rate_mean']:7.1f}, "
          f"admitted {row['admission_ratio_mean']:.2f}")
print(f"CSV files in {out_dir}")
