"""Mean throughput versus BS count at desk scale (a few seeds, so quick).

    python3 demos/bs_sweep.py [seeds]
"""
import sys

from hsbnet import experiments as ex
from hsbnet.scenario import ScenarioConfig

seeds = range(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
values = list(range(8, 14))
means = ex.sweep_means(ex.sweep("num_bs", values, seeds=seeds,
                                base=ScenarioConfig(num_mus=50, num_bss=5)))
print("BSs " + "".join(f"{s:>18s}" for s in ex.SCHEME_IDS))
for v in values:
    print(f"{v:3d} " + "".join(f"{means[(v, s)]:18.0f}" for s in ex.SCHEME_IDS))
