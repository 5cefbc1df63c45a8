"""
Comfort under a budget, and a brute-force sanity check
======================================================

First sweep the spend budget in comfort mode; then compare the LMPC with
exhaustive enumeration on a few four-step single-zone problems.
"""
# %%
import numpy as np

from lmpc_hvac import reference as ref
from lmpc_hvac.lmpc import run_lmpc
from lmpc_hvac.nlmpc import GridSpec, brute_force_nlmpc
from lmpc_hvac.thermal import assemble_state_space

model = assemble_state_space(ref.reference_network())
sc = ref.generate_reference(seed=0)
full = run_lmpc(model, sc).total_cost
occ = sc.occupancy == 1

# %%
for frac in (0.0, 0.25, 0.5, 1.0):
    cm = sc.with_objective(ref.comfort_objective(sc, frac * full, T_oc=23.0))
    tr = run_lmpc(model, cm)
    dev = np.sum(np.abs(tr.y[occ, 0] - 23.0))
    print(f"budget {frac:4.0%} of {full:.4f}: spent {tr.total_cost:.4f}, L1 deviation {dev:.2f}")

# %%
zone = assemble_state_space(ref.single_zone_network())
rng = np.random.default_rng(1)
for i in range(4):
    tiny = ref.tiny_scenario(rng, K=4)
    bf = brute_force_nlmpc(zone, tiny, GridSpec(21, 4, 1))
    lp = run_lmpc(zone, tiny).total_cost
    print(f"tiny {i}: LMPC {lp:.5f}  grid optimum {bf.cost:.5f}  gap {(lp - bf.cost) / bf.cost:+.2%}")
