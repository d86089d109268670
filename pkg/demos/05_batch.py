"""
Batch comparison over fleet sizes
=================================

Seeded random scenarios for N = 3..8; each method sees the same seeds.  Set
COOPSAFE_WORKERS to spread trials over processes.
"""

import sys
from pathlib import Path

from coopsafe import batch_run, load_brs
from coopsafe.persistence import write_summary

OUT = Path(__file__).with_name("out")
BRS = OUT / "brs.bin"
if not BRS.exists():
    raise SystemExit("run 01_value_function.py first")
field = load_brs(BRS)

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10
rows = batch_run(range(3, 9), trials, 0, ["mip", "samv", "baseline"], field, violation_radius=4.8)
print(f"{'N':>2} {'method':8s} {'success':>8s} {'conflict':>9s}")
for r in rows:
    print(f"{r['N']:2d} {r['method']:8s} {r['success_ratio']:8.3f} {r['conflict_ratio']:9.4f}")
write_summary(rows, OUT / "summary.csv")
