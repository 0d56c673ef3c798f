"""
A small coverage study
======================

Repeat the one-specimen recipe many times with fresh noise and count how
often each interval contains the truth. The full study in the test suite
uses 500 replications per noise level; this one is sized to finish in a
minute or so.
"""

from bondgauge import ExperimentConfig, NoiseGrid, run_coverage_experiment

config = ExperimentConfig(noise_grid=NoiseGrid((1.0, 10.0)), replications=60, seed=2024)
report = run_coverage_experiment(config)

print(f"nominal stiffness level {1 - config.budget.gamma:.4f}, bond level {1 - config.alpha:.2f}")
print("method  sigma  coverage  95% CP band        mean length")
for c in report.cells:
    print(f"{c.method:6s}  {c.value:5.1f}  {c.coverage_stiffness:8.3f}  "
          f"[{c.cp_stiffness[0]:.3f}, {c.cp_stiffness[1]:.3f}]  {c.mean_len_stiffness:9.4f}")

# The same numbers as CSV, ready for any plotting tool.
print()
print(report.to_csv_text())
