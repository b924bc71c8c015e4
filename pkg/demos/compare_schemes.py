"""Run the proposed scheme and the four baselines on one desk-scale scenario.

    python3 demos/compare_schemes.py [seed]
"""
import sys

from hsbnet import experiments as ex
from hsbnet.scenario import ScenarioConfig, generate_scenario
from hsbnet.thresholds import all_thresholds

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
scenario = generate_scenario(ScenarioConfig(num_mus=50, num_bss=5), seed)
table = all_thresholds(scenario)  # shared by every scheme
print(f"seed {seed}: {scenario.num_mus} MUs, {scenario.num_bss} BSs, "
      f"{int(table.feasible().any(axis=(1, 2)).sum())} MUs with a feasible link")

for scheme in ex.SCHEME_IDS:
    r = ex.run(scheme, scenario, seed, table, allow_drops=True)
    sem = int(((r.assignment.mode == 0) & r.assignment.served()).sum())
    failed = [k for k, ok in r.audit.checks.items() if not ok]
    print(f"{scheme:18s} {r.total_throughput:10.1f} msg/s  "
          f"QoS met {int(r.audit.qos_ok.sum()):2d}/{scenario.num_mus}  SemCom MUs {sem:2d}  "
          f"audit {'ok' if not failed else 'fails ' + ','.join(failed)}")
