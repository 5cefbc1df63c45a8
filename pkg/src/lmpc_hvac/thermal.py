"""RC-network building descriptions and their discrete-time state-space form.

A building is a set of wall and room nodes joined by thermal resistances.
Each node's temperature is advanced with a zero-order-hold step of length
``tau``::

    x[k+1] = A x[k] + B (u[k] * (T_s - C x[k])) + E d[k]

The disturbance vector ``d`` is laid out as ``[T_amb, q_rad per node,
q_int per room]`` and the labels travel with the model.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

AMBIENT = "ambient"
DEFAULT_AIR_HEAT_CAPACITY = 1005.0


class NetworkError(ValueError):
    """Raised when an RC-network description is malformed."""


@dataclass(frozen=True)
class Wall:
    id: str
    c: float
    alpha: float = 0.0
    area: float = 0.0
    r: int = 0
    neighbors: tuple[tuple[str, float], ...] = ()

    kind = "wall"


@dataclass(frozen=True)
class Room:
    id: str
    c: float
    T_s: float
    g: int = 0
    beta_win: float = 0.0
    A_win: float = 0.0
    neighbors: tuple[tuple[str, float], ...] = ()

    kind = "room"


@dataclass(frozen=True)
class RCNetwork:
    """Lumped thermal circuit: node list, sampling interval and air heat capacity.

    A neighbor id of ``"ambient"`` couples a node to the outdoor temperature.
    """

    nodes: tuple[Wall | Room, ...]
    tau: float
    air_heat_capacity: float = DEFAULT_AIR_HEAT_CAPACITY

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        self.check()

    @property
    def ids(self) -> list[str]:
        return [nd.id for nd in self.nodes]

    @property
    def rooms(self) -> list[Room]:
        return [nd for nd in self.nodes if isinstance(nd, Room)]

    def check(self) -> None:
        if not np.isfinite(self.tau) or self.tau < 0:
            raise NetworkError(f"tau must be >= 0, got {self.tau}")
        if self.air_heat_capacity <= 0:
            raise NetworkError("air_heat_capacity must be positive")
        if not self.rooms:
            raise NetworkError("network has no room node")
        ids = self.ids
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate node ids")
        if AMBIENT in ids:
            raise NetworkError(f"'{AMBIENT}' is reserved for the outdoor node")
        by_id = {nd.id: nd for nd in self.nodes}
        for nd in self.nodes:
            if not nd.c > 0:
                raise NetworkError(f"node {nd.id}: capacitance must be positive")
            flag = nd.r if isinstance(nd, Wall) else nd.g
            if flag not in (0, 1):
                raise NetworkError(f"node {nd.id}: radiation flag must be 0 or 1")
            seen = set()
            for other, res in nd.neighbors:
                if not res > 0:
                    raise NetworkError(f"node {nd.id}: resistance to {other} must be positive")
                if other in seen:
                    raise NetworkError(f"node {nd.id}: neighbor {other} listed twice")
                seen.add(other)
                if other == AMBIENT:
                    continue
                if other not in by_id:
                    raise NetworkError(f"node {nd.id}: dangling neighbor reference {other!r}")
                if other == nd.id:
                    raise NetworkError(f"node {nd.id}: self loop")
                back = dict(by_id[other].neighbors).get(nd.id)
                if back is None:
                    raise NetworkError(f"asymmetric adjacency: {nd.id} -> {other} has no reverse edge")
                if not np.isclose(back, res, rtol=1e-12, atol=0.0):
                    raise NetworkError(f"resistance mismatch between {nd.id} and {other}: {res} vs {back}")


@dataclass(frozen=True, eq=False)
class BuildingModel:
    """Discrete-time matrices of a building plus supply-air temperatures."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray
    T_s: np.ndarray
    tau: float
    disturbance_labels: tuple[str, ...]
    state_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        for name in ("A", "B", "C", "E", "T_s"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n, m, l = self.n, self.m, self.l
        if self.A.shape != (n, n) or self.B.shape != (n, m) or self.C.shape != (m, n):
            raise ValueError("inconsistent A/B/C shapes")
        if self.E.shape != (n, l) or self.T_s.shape != (m,):
            raise ValueError("inconsistent E/T_s shapes")
        if len(self.disturbance_labels) != l:
            raise ValueError("disturbance_labels length differs from E columns")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def l(self) -> int:
        return self.E.shape[1]

    @property
    def room_rows(self) -> np.ndarray:
        return np.argmax(self.C, axis=1)

    @property
    def ambient_index(self) -> int:
        return self.disturbance_labels.index("T_amb")

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "l": self.l, "tau": self.tau,
            "A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(),
            "E": self.E.tolist(), "T_s": self.T_s.tolist(),
            "disturbance_labels": list(self.disturbance_labels),
            "state_labels": list(self.state_labels),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BuildingModel":
        return cls(
            A=data["A"], B=data["B"], C=data["C"], E=data["E"], T_s=data["T_s"],
            tau=data["tau"], disturbance_labels=tuple(data["disturbance_labels"]),
            state_labels=tuple(data.get("state_labels", ())),
        )


def disturbance_layout(network: RCNetwork) -> tuple[str, ...]:
    return (
        ("T_amb",)
        + tuple(f"q_rad:{nd.id}" for nd in network.nodes)
        + tuple(f"q_int:{rm.id}" for rm in network.rooms)
    )


def assemble_state_space(network: RCNetwork) -> BuildingModel:
    """Build A, B, C, E from the wall and room heat balances."""
    network.check()
    ids = network.ids
    pos = {nid: i for i, nid in enumerate(ids)}
    rooms = network.rooms
    n, m = len(ids), len(rooms)
    tau, c_a = network.tau, network.air_heat_capacity
    A = np.eye(n)
    B = np.zeros((n, m))
    C = np.zeros((m, n))
    E = np.zeros((n, 1 + n + m))
    room_col = {rm.id: j for j, rm in enumerate(rooms)}

    for i, nd in enumerate(network.nodes):
        # each coupling enters as tau / (c * R'); the diagonal keeps the rest
        terms = [tau / (nd.c * res) for _, res in nd.neighbors]
        A[i, i] = 1.0 - sum(terms)
        for (other, _), g in zip(nd.neighbors, terms):
            if other == AMBIENT:
                E[i, 0] = g
            else:
                A[i, pos[other]] = g
        if isinstance(nd, Wall):
            E[i, 1 + i] = tau * nd.r * nd.alpha * nd.area / nd.c
        else:
            j = room_col[nd.id]
            C[j, i] = 1.0
            B[i, j] = tau * c_a / nd.c
            E[i, 1 + i] = tau * nd.g * nd.beta_win * nd.A_win / nd.c
            E[i, 1 + n + j] = tau / nd.c

    return BuildingModel(
        A=A, B=B, C=C, E=E,
        T_s=np.array([rm.T_s for rm in rooms], dtype=float),
        tau=tau,
        disturbance_labels=disturbance_layout(network),
        state_labels=tuple(ids),
    )


@dataclass
class ValidationReport:
    max_discrepancy: float
    discrepancies: dict[str, float]
    stability_warnings: list[str]

    @property
    def ok(self) -> bool:
        return self.max_discrepancy == 0.0 and not self.stability_warnings

    def __str__(self) -> str:
        lines = [f"max discrepancy: {self.max_discrepancy:.3e}"]
        lines += [f"  {k}: {v:.3e}" for k, v in self.discrepancies.items()]
        lines += [f"warning: {w}" for w in self.stability_warnings]
        return "\n".join(lines)


def _reference_entries(network: RCNetwork):
    # Entry-by-entry evaluation of the heat balances, kept independent of
    # the vectorised assembly above.
    ids = network.ids
    n = len(ids)
    rooms = [nd.id for nd in network.nodes if isinstance(nd, Room)]
    m = len(rooms)
    tau = network.tau
    nodes = {nd.id: nd for nd in network.nodes}
    A = [[0.0] * n for _ in range(n)]
    B = [[0.0] * m for _ in range(n)]
    C = [[0.0] * n for _ in range(m)]
    E = [[0.0] * (1 + n + m) for _ in range(n)]
    for i, a in enumerate(ids):
        node = nodes[a]
        adj = dict(node.neighbors)
        for j, b in enumerate(ids):
            if i == j:
                A[i][j] = 1.0 - sum(tau / (node.c * res) for res in adj.values())
            elif b in adj:
                A[i][j] = tau / (node.c * adj[b])
        if AMBIENT in adj:
            E[i][0] = tau / (node.c * adj[AMBIENT])
        if isinstance(node, Wall):
            E[i][1 + i] = tau * node.r * node.alpha * node.area / node.c
        else:
            j = rooms.index(a)
            B[i][j] = tau * network.air_heat_capacity / node.c
            C[j][i] = 1.0
            E[i][1 + i] = tau * node.g * node.beta_win * node.A_win / node.c
            E[i][1 + n + j] = tau / node.c
    return {"A": A, "B": B, "C": C, "E": E}


def validate_model(model: BuildingModel, network: RCNetwork) -> ValidationReport:
    """Re-derive every matrix entry from ``network`` and report mismatches.

    Also warns about nodes whose total coupling ``tau * sum(1/R')`` reaches
    the node capacitance, where the explicit update may oscillate.
    """
    ref = _reference_entries(network)
    disc = {}
    for name, expected in ref.items():
        got = np.asarray(getattr(model, name))
        expected = np.asarray(expected, dtype=float)
        if got.shape != expected.shape:
            disc[name] = float("inf")
        else:
            disc[name] = float(np.max(np.abs(got - expected), initial=0.0))
    ts_ref = np.array([rm.T_s for rm in network.rooms])
    disc["T_s"] = (
        float(np.max(np.abs(model.T_s - ts_ref)))
        if model.T_s.shape == ts_ref.shape else float("inf")
    )

    warnings = []
    for nd in network.nodes:
        ratio = network.tau * sum(1.0 / res for _, res in nd.neighbors) / nd.c
        if ratio >= 1.0:
            warnings.append(
                f"node {nd.id}: tau*sum(1/R')/c = {ratio:.3g} >= 1, "
                "discrete update may be unstable"
            )
    return ValidationReport(max(disc.values()), disc, warnings)


# JSON ----------------------------------------------------------------------

def network_from_dict(data: dict) -> RCNetwork:
    try:
        nodes = []
        for raw in data["nodes"]:
            nbrs = tuple((str(nb["node"]), float(nb["R"])) for nb in raw.get("neighbors", []))
            kind = raw["kind"]
            if kind == "wall":
                nodes.append(Wall(
                    id=str(raw["id"]), c=float(raw["c"]), alpha=float(raw.get("alpha", 0.0)),
                    area=float(raw.get("area", 0.0)), r=int(raw.get("r", 0)), neighbors=nbrs,
                ))
            elif kind == "room":
                nodes.append(Room(
                    id=str(raw["id"]), c=float(raw["c"]), T_s=float(raw["T_s"]),
                    g=int(raw.get("g", 0)), beta_win=float(raw.get("beta_win", 0.0)),
                    A_win=float(raw.get("A_win", 0.0)), neighbors=nbrs,
                ))
            else:
                raise NetworkError(f"unknown node kind {kind!r}")
        return RCNetwork(
            nodes=tuple(nodes), tau=float(data["tau"]),
            air_heat_capacity=float(data.get("air_heat_capacity", DEFAULT_AIR_HEAT_CAPACITY)),
        )
    except KeyError as exc:
        raise NetworkError(f"missing field {exc.args[0]!r}") from None


def network_to_dict(network: RCNetwork) -> dict:
    nodes = []
    for nd in network.nodes:
        raw = {"id": nd.id, "kind": nd.kind, "c": nd.c}
        if isinstance(nd, Wall):
            raw.update(alpha=nd.alpha, area=nd.area, r=nd.r)
        else:
            raw.update(T_s=nd.T_s, g=nd.g, beta_win=nd.beta_win, A_win=nd.A_win)
        raw["neighbors"] = [{"node": o, "R": r} for o, r in nd.neighbors]
        nodes.append(raw)
    return {"tau": network.tau, "air_heat_capacity": network.air_heat_capacity, "nodes": nodes}


def load_network(path) -> RCNetwork:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def save_network(network: RCNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(network), indent=2) + "\n")
