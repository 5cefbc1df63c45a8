"""Synthetic buildings and the 24 h reference scenario.

The 7-node building is one thermal zone enclosed by four walls, a floor
and a ceiling.  Parameter values are representative, not measured.
"""
from __future__ import annotations

import numpy as np

from .power import HvacParams
from .scenario import UNOCCUPIED_BAND, ComfortMax, CostMin, DisturbanceSeries, Scenario
from .thermal import AMBIENT, RCNetwork, Room, Wall, assemble_state_space, disturbance_layout

TAU = 900.0
STEPS_PER_DAY = 96
T_SUPPLY = 10.0
COMFORT_BAND = (21.0, 25.0)

# (start hour, price per kWh)
TOU_TIERS = ((0, 0.08), (7, 0.12), (14, 0.25), (21, 0.12))
OCCUPIED_HOURS = ((0, 6), (18, 24))
# variant -> (mean, amplitude) of the ambient curve, in degC
AMBIENT_VARIANTS = {1: (21.0, 3.0), 2: (21.0, 5.0)}
X0 = 22.5


def single_room_network(tau: float = TAU) -> RCNetwork:
    """Room coupled straight to ambient with deliberately extreme parameters."""
    room = Room("room", c=1e5, T_s=T_SUPPLY, g=1, beta_win=0.0, A_win=0.0,
                neighbors=((AMBIENT, 0.01),))
    return RCNetwork(nodes=(room,), tau=tau)


def single_zone_network(tau: float = TAU) -> RCNetwork:
    """Room plus one lumped envelope wall."""
    room = Room("zone", c=3e6, T_s=T_SUPPLY, g=1, beta_win=0.5, A_win=4.0,
                neighbors=(("envelope", 0.004), (AMBIENT, 0.03)))
    wall = Wall("envelope", c=2e7, alpha=0.6, area=40.0, r=1,
                neighbors=(("zone", 0.004), (AMBIENT, 0.008)))
    return RCNetwork(nodes=(room, wall), tau=tau)


def reference_network(tau: float = TAU) -> RCNetwork:
    """Seven-node zone: four walls, floor, ceiling, room air."""
    walls = [("wall_n", 0.2), ("wall_e", 0.6), ("wall_s", 0.8), ("wall_w", 0.7)]
    room_nbrs = [(w, 0.012) for w, _ in walls] + [("floor", 0.008), ("ceiling", 0.006), (AMBIENT, 0.008)]
    nodes = [Room("zone", c=4e6, T_s=T_SUPPLY, g=1, beta_win=0.5, A_win=2.0, neighbors=tuple(room_nbrs))]
    for name, alpha in walls:
        nodes.append(Wall(name, c=6e6, alpha=alpha, area=15.0, r=1,
                          neighbors=(("zone", 0.012), (AMBIENT, 0.01))))
    nodes.append(Wall("floor", c=5e6, alpha=0.0, area=30.0, r=0, neighbors=(("zone", 0.008),)))
    nodes.append(Wall("ceiling", c=4e6, alpha=0.7, area=30.0, r=1,
                      neighbors=(("zone", 0.006), (AMBIENT, 0.01))))
    return RCNetwork(nodes=tuple(nodes), tau=tau)


def hours(K: int = STEPS_PER_DAY, tau: float = TAU) -> np.ndarray:
    return np.arange(K) * tau / 3600.0


def tou_prices(K: int = STEPS_PER_DAY, tau: float = TAU) -> np.ndarray:
    h = hours(K, tau) % 24
    price = np.zeros(K)
    for start, p in TOU_TIERS:
        price[h >= start] = p
    return price


def occupancy_pattern(K: int = STEPS_PER_DAY, tau: float = TAU) -> np.ndarray:
    h = hours(K, tau) % 24
    occ = np.zeros(K, dtype=int)
    for a, b in OCCUPIED_HOURS:
        occ[(h >= a) & (h < b)] = 1
    return occ


def ambient_curve(variant: int = 1, K: int = STEPS_PER_DAY, tau: float = TAU) -> np.ndarray:
    """Diurnal ambient temperature: minimum near 02:00, maximum near 14:00."""
    mean, amp = AMBIENT_VARIANTS[variant]
    return mean + amp * np.sin(2 * np.pi * (hours(K, tau) - 8.0) / 24.0)


def solar_curve(K: int = STEPS_PER_DAY, tau: float = TAU, peak: float = 60.0) -> np.ndarray:
    h = hours(K, tau) % 24
    return np.where((h > 6) & (h < 18), peak * np.sin(np.pi * (h - 6) / 12), 0.0).clip(min=0.0)


def internal_gains(occ: np.ndarray, K: int = STEPS_PER_DAY, tau: float = TAU) -> np.ndarray:
    h = hours(K, tau) % 24
    gains = np.full(K, 200.0)
    gains[(occ == 1) & (h >= 18)] = 2000.0
    gains[(occ == 1) & (h < 6)] = 400.0
    return gains


def comfort_bands(occ: np.ndarray):
    lo = np.where(occ == 1, COMFORT_BAND[0], UNOCCUPIED_BAND[0])
    hi = np.where(occ == 1, COMFORT_BAND[1], UNOCCUPIED_BAND[1])
    return lo.astype(float), hi.astype(float)


def reference_hvac(m: int = 1, COP: float = 3.0) -> HvacParams:
    return HvacParams(P_rated=np.full(m, 600.0), u_rated=np.full(m, 1.0), COP=COP, d_p=0.0)


def build_disturbances(network: RCNetwork, T_amb, q_rad, q_int) -> DisturbanceSeries:
    labels = disturbance_layout(network)
    K = len(T_amb)
    vals = np.zeros((K, len(labels)))
    vals[:, 0] = T_amb
    n = len(network.nodes)
    vals[:, 1:1 + n] = np.asarray(q_rad)[:, None]
    vals[:, 1 + n:] = np.asarray(q_int).reshape(K, -1)
    return DisturbanceSeries(labels=labels, values=vals)


def generate_reference(seed: int = 0, variant: int = 1, network: RCNetwork | None = None,
                       objective=None) -> Scenario:
    """Deterministic 24 h, 15 min scenario for ``network`` (default: the 7-node zone).

    ``variant`` 2 is a hotter day with a larger ambient swing.  ``seed``
    perturbs the ambient and solar curves slightly.
    """
    network = network or reference_network()
    model = assemble_state_space(network)
    K = STEPS_PER_DAY
    rng = np.random.default_rng(seed)
    T_amb = ambient_curve(variant) + rng.normal(0.0, 0.2, K)
    q_rad = solar_curve() * (1.0 + rng.normal(0.0, 0.03, K))
    q_rad = q_rad.clip(min=0.0)
    occ = occupancy_pattern()
    gains = internal_gains(occ)
    T_min, T_max = comfort_bands(occ)
    hvac = reference_hvac(model.m)
    peak_chiller = hvac.c_a / hvac.COP * 1.0 * (float(T_amb.max()) - T_SUPPLY)
    P_H_max = np.full(K, 2.0 * (hvac.P_rated.sum() + model.m * peak_chiller))
    x0 = np.full(model.n, X0)
    return Scenario(
        tau=TAU,
        window=K,
        prices=tou_prices(),
        disturbances=build_disturbances(network, T_amb, q_rad, np.tile(gains[:, None], (1, model.m))),
        occupancy=occ,
        T_min=T_min,
        T_max=T_max,
        u_min=np.zeros(model.m),
        u_max=np.ones(model.m),
        P_H_max=P_H_max,
        hvac=hvac,
        x0=x0,
        objective=objective or CostMin(),
        start="2020-07-01T00:00:00",
        name=f"reference-{variant}-seed{seed}",
    )


def comfort_objective(scenario: Scenario, budget: float, T_oc: float = 23.0) -> ComfortMax:
    return ComfortMax(T_oc=np.full(scenario.K, T_oc), budget=budget)


def random_network(rng: np.random.Generator, rooms: int | None = None, walls: int | None = None,
                   tau: float | None = None) -> RCNetwork:
    """Random connected RC network for property tests.

    Nodes are chained into a random tree, then a few extra links and ambient
    couplings are added.  Parameter ranges are loosely physical.
    """
    rooms = int(rng.integers(1, 4)) if rooms is None else rooms
    walls = int(rng.integers(0, 6)) if walls is None else walls
    tau = float(rng.uniform(60.0, 900.0)) if tau is None else tau
    ids = [f"room{i}" for i in range(rooms)] + [f"wall{i}" for i in range(walls)]
    order = rng.permutation(len(ids))
    links: dict[tuple[int, int], float] = {}
    for pos in range(1, len(order)):
        a, b = int(order[pos]), int(order[rng.integers(0, pos)])
        links[(min(a, b), max(a, b))] = float(rng.uniform(0.002, 0.05))
    for _ in range(int(rng.integers(0, len(ids) + 1))):
        a, b = (int(v) for v in rng.choice(len(ids), 2, replace=True))
        if a != b:
            links.setdefault((min(a, b), max(a, b)), float(rng.uniform(0.002, 0.05)))
    amb = rng.random(len(ids)) < 0.6
    amb[rng.integers(0, len(ids))] = True
    nbrs: list[list[tuple[str, float]]] = [[] for _ in ids]
    for (a, b), R in sorted(links.items()):
        nbrs[a].append((ids[b], R))
        nbrs[b].append((ids[a], R))
    for i in np.flatnonzero(amb):
        nbrs[i].append((AMBIENT, float(rng.uniform(0.005, 0.05))))
    nodes = []
    for i, name in enumerate(ids):
        if i < rooms:
            nodes.append(Room(name, c=float(rng.uniform(1e6, 1e7)), T_s=float(rng.uniform(8.0, 14.0)),
                              g=int(rng.integers(0, 2)), beta_win=float(rng.uniform(0.0, 0.8)),
                              A_win=float(rng.uniform(0.0, 8.0)), neighbors=tuple(nbrs[i])))
        else:
            nodes.append(Wall(name, c=float(rng.uniform(1e6, 3e7)), alpha=float(rng.uniform(0.0, 1.0)),
                              area=float(rng.uniform(5.0, 40.0)), r=int(rng.integers(0, 2)),
                              neighbors=tuple(nbrs[i])))
    return RCNetwork(nodes=tuple(nodes), tau=tau)


def tiny_scenario(rng: np.random.Generator, K: int = 4) -> Scenario:
    """Short, warm, fully occupied single-zone scenario that needs cooling."""
    network = single_zone_network()
    model = assemble_state_space(network)
    T_amb = np.full(K, rng.uniform(29.0, 35.0)) + rng.normal(0.0, 0.3, K)
    q_rad = rng.uniform(0.0, 150.0, K)
    gains = rng.uniform(1000.0, 2500.0, K)
    occ = np.ones(K, dtype=int)
    T_min, T_max = comfort_bands(occ)
    hvac = reference_hvac(1)
    x0 = np.array([rng.uniform(25.5, 27.5), rng.uniform(26.0, 29.0)])
    prices = rng.choice([p for _, p in TOU_TIERS], K)
    return Scenario(
        tau=TAU, window=K, prices=prices,
        disturbances=build_disturbances(network, T_amb, q_rad, gains[:, None]),
        occupancy=occ, T_min=T_min, T_max=T_max, u_min=[0.0], u_max=[1.0],
        P_H_max=np.full(K, 1e5), hvac=hvac, x0=x0, objective=CostMin(), name="tiny",
    )
