"""
Run every benchmark experiment at desk scale and write one CSV per experiment.
Pass --full-scale for 100 MiB corpora and 1000-trial prefix analysis (slow).

Usage: python -u reproduce_all.py [--full-scale]
"""

import logging
import os
import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

import config
from bench_harness import EXPERIMENTS, BenchSettings, run_experiment, write_table

# Configuration
RESULTS_DIR = os.path.join(os.path.dirname(__file__), "results")
FULL_SCALE = "--full-scale" in sys.argv[1:]

logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
config.load_env_file(os.path.join(os.path.dirname(__file__), '.env'))
os.makedirs(RESULTS_DIR, exist_ok=True)

settings = BenchSettings(full_scale=FULL_SCALE)

print("=" * 60)
print("HEPFAC BENCHMARK REPRODUCTION")
print("=" * 60)
print(f"Scale:   {'full (100 MiB corpora)' if FULL_SCALE else 'desk (1 MiB corpora)'}")
print(f"Workers: {settings.workers}")
print(f"Runs:    {settings.runs}")
print(f"Output:  {RESULTS_DIR}")
print("=" * 60)

failed = []
for name in EXPERIMENTS:
    print(f"\n[{name}]")
    result = run_experiment(name, settings)
    path = os.path.join(RESULTS_DIR, f"{name}.csv")
    write_table(result.table, path, result.run_config)
    for check in result.checks:
        status = "PASS" if check.passed else ("FAIL" if check.required else "WARN")
        print(f"    {status} - {check.name}: {check.detail}")
    print(f"    wrote {path}")
    if not result.passed:
        failed.append(name)

print("\n" + "=" * 60)
print("ALL CHECKS PASSED" if not failed else f"FAILED: {', '.join(failed)}")
print("=" * 60)
sys.exit(1 if failed else 0)
