"""
Feedback linearization, bound mapping and the PWL fan model
===========================================================

A single room coupled to ambient, small enough to check by hand.
"""
# %%
import numpy as np

from lmpc_hvac import reference as ref
from lmpc_hvac.linearize import (
    build_pwl, linearized_chiller_row, linearized_fan_coefficient, map_bounds_initial,
    recover_air_mass_flow, to_linearized_input,
)
from lmpc_hvac.plant import plant_step
from lmpc_hvac.thermal import assemble_state_space

model = assemble_state_space(ref.single_room_network())
print("A =", model.A, " B =", model.B, " E =", model.E)

# %%
# The plant is bilinear in (u, y).  Substituting v = u * (T_s - y) makes it
# linear, and the substitution is exact.
x, u, d = np.array([25.0]), np.array([0.5]), np.array([30.0, 0.0, 0.0])
v = to_linearized_input(u, model.C @ x, model.T_s)
print("bilinear:", plant_step(model, x, u, d), " linear in v:", model.A @ x + model.B @ v + model.E @ d)
print("recovered u:", recover_air_mass_flow(v, model.C @ x, model.T_s)[0])

# %%
# Bounds on u become bounds on v.  The room is warmer than the supply air, so
# the signs flip: full flow is the most negative v.
b = map_bounds_initial([0.0], [1.0], model.C @ x, model.T_s, W=3)
print("v bounds per offset:", np.column_stack([b.v_min[:, 0], b.v_max[:, 0]]))

# %%
# With the output frozen, fan power is c * v**3 and the chiller term is linear.
hv = ref.reference_hvac()
c, _ = linearized_fan_coefficient(0, 25.0, hv, 10.0)
chil, _ = linearized_chiller_row([25.0], 30.0, hv, model.T_s)
print(f"fan coefficient {c:.5f}, chiller coefficient {chil[0]:.2f}")

# %%
# The cube is replaced by an incremental PWL model.  Error shrinks like 1/L**2.
for L in (2, 4, 8, 16, 32):
    pwl = build_pwl(-15.0, 0.0, L)
    vv = np.linspace(-15.0, 0.0, 10_001)
    err = np.max(np.abs(pwl(vv) - vv ** 3)) / 15.0 ** 3
    print(f"L={L:2d}  max error {err:.4%} of the range")
