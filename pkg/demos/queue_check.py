"""Analytic queue model against Monte Carlo on a few reference links.

    python3 demos/queue_check.py [packets]
"""
import sys

from hsbnet.experiments import validate_queue

n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
print(f"{'case':16s} {'quantity':12s} {'analytic':>12s} {'monte carlo':>12s} {'rel err':>8s}")
for case, qty, analytic, mc, _, rel in validate_queue(packets=n, slots=n, seed=1):
    print(f"{case:16s} {qty:12s} {analytic:12.6g} {mc:12.6g} {rel:8.4f}")
