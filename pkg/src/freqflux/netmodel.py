"""Static network description, admittance assembly and short-circuit levels.

Buses are indexed 0-based internally. Case files use the external (usually
1-based) bus numbers; :func:`load_case` translates them and keeps the
external labels in :attr:`Network.bus_ids` for reporting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._linalg import checked_inv
from .errors import DisconnectedNetwork, InputError, InvalidBranch

BUS_KINDS = ("slack", "PV", "PQ")


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = "PQ"
    v_setpoint: float = 1.0
    p_load: float = 0.0
    q_load: float = 0.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0
    p_gen: float = 0.0

    def __post_init__(self):
        if self.kind not in BUS_KINDS:
            raise InputError(f"bus {self.id}: unknown kind {self.kind!r}")
        vals = (self.v_setpoint, self.p_load, self.q_load, self.shunt_g, self.shunt_b, self.p_gen)
        if not np.all(np.isfinite(vals)):
            raise InputError(f"bus {self.id}: non-finite per-unit value")


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    tap: float = 1.0

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise InvalidBranch(f"branch {self.from_bus}-{self.to_bus} is a self loop")
        if self.x == 0.0:
            raise InvalidBranch(f"branch {self.from_bus}-{self.to_bus} has x = 0")
        if self.tap <= 0.0:
            raise InvalidBranch(f"branch {self.from_bus}-{self.to_bus} has tap <= 0")


@dataclass(frozen=True)
class Machine:
    """Synchronous machine (or grid-forming unit with virtual inertia).

    ``M`` is the starting time (2H) in seconds on system base and
    ``x_internal`` the transient plus step-up reactance in pu.
    """

    bus: int
    M: float
    x_internal: float
    damping: float = 2.0

    def __post_init__(self):
        if not self.M > 0.0:
            raise InputError(f"machine at bus {self.bus}: M must be positive")
        if not self.x_internal > 0.0:
            raise InputError(f"machine at bus {self.bus}: x_internal must be positive")


@dataclass(frozen=True)
class AdmittanceSet:
    y_bus: np.ndarray
    g_bus: np.ndarray
    b_bus: np.ndarray

    @classmethod
    def from_complex(cls, y_bus):
        y_bus = np.asarray(y_bus, dtype=complex)
        for a in (y_bus,):
            a.setflags(write=False)
        g, b = y_bus.real.copy(), y_bus.imag.copy()
        g.setflags(write=False)
        b.setflags(write=False)
        return cls(y_bus, g, b)

    @property
    def n(self):
        return self.y_bus.shape[0]


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    machines: tuple[Machine, ...] = ()
    base_mva: float = 100.0
    f_nominal_hz: float = 50.0
    name: str = ""
    bus_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        n = len(self.buses)
        if not self.bus_ids:
            object.__setattr__(self, "bus_ids", tuple(range(1, n + 1)))
        for k, bus in enumerate(self.buses):
            if bus.id != k:
                raise InputError("internal bus ids must be 0..n-1 in order")
        for br in self.branches:
            if not (0 <= br.from_bus < n and 0 <= br.to_bus < n):
                raise InvalidBranch(f"branch {br.from_bus}-{br.to_bus} references a missing bus")
        for m in self.machines:
            if not 0 <= m.bus < n:
                raise InputError(f"machine references missing bus {m.bus}")

    @property
    def n(self):
        return len(self.buses)

    @property
    def omega_base(self):
        """Nominal angular frequency in rad/s."""
        return 2.0 * np.pi * self.f_nominal_hz

    def array(self, name):
        return np.array([getattr(b, name) for b in self.buses], dtype=float)

    def kinds(self):
        return np.array([b.kind for b in self.buses])

    @property
    def machine_buses(self):
        return np.array([m.bus for m in self.machines], dtype=int)

    @property
    def inertia(self):
        return np.array([m.M for m in self.machines], dtype=float)

    def label(self, k):
        return self.bus_ids[k]

    def index(self, external_id):
        try:
            return self.bus_ids.index(external_id)
        except ValueError:
            raise InputError(f"unknown bus {external_id}") from None

    def replace(self, **changes):
            return replace(self, **changes)


def check_connected(n, branches):
    if n == 0:
        raise DisconnectedNetwork("network has no buses")
    rows = [br.from_bus for br in branches]
    cols = [br.to_bus for br in branches]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp > 1:
        raise DisconnectedNetwork(f"network has {ncomp} islands")


def assemble_admittance(buses, branches) -> AdmittanceSet:
    """Bus admittance matrix with pi-model branches, off-nominal taps on the
    from side, and bus shunts."""
    n = len(buses)
    check_connected(n, branches)
    y = np.zeros((n, n), dtype=complex)
    for br in branches:
        if br.x == 0.0:
            raise InvalidBranch(f"branch {br.from_bus}-{br.to_bus} has x = 0")
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b_charging
        f, t, a = br.from_bus, br.to_bus, br.tap
        y[f, f] += (ys + ysh) / a**2
        y[t, t] += ys + ysh
        y[f, t] -= ys / a
        y[t, f] -= ys / a
    for k, bus in enumerate(buses):
        y[k, k] += complex(bus.shunt_g, bus.shunt_b)
    return AdmittanceSet.from_complex(y)


def network_admittance(net: Network) -> AdmittanceSet:
    return assemble_admittance(net.buses, net.branches)


def machine_admittance(n, machines):
    """Diagonal of the machine admittance matrix ``Y_g`` (pure reactance)."""
    yg = np.zeros(n, dtype=complex)
    for m in machines:
        yg[m.bus] += 1.0 / (1j * m.x_internal)
    return yg


def augmented_admittance(adm: AdmittanceSet, machines) -> AdmittanceSet:
    """``Y_bus + Y_g``: network plus machine internal admittances to ground."""
    yg = machine_admittance(adm.n, machines)
    return AdmittanceSet.from_complex(adm.y_bus + np.diag(yg))


def short_circuit_levels(admittance: AdmittanceSet, machines) -> np.ndarray:
    """SCL_i = 1/|Z_ii| with Z = [Y_bus + Y_g]^-1."""
    aug = augmented_admittance(admittance, machines)
    z, _ = checked_inv(aug.y_bus, "Y_bus + Y_g")
    return 1.0 / np.abs(np.diag(z))


# ---------------------------------------------------------------------------
# case files


def bundled_case_path(name="ieee14.json"):
    return Path(str(resources.files("freqflux") / "data" / name))


def resolve_case(ref, base_dir=None) -> Path:
    """Locate a case file: relative to ``base_dir``, then as given, then bundled."""
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None and (Path(base_dir) / p).exists():
        return Path(base_dir) / p
    if p.exists():
        return p
    bundled = bundled_case_path(p.name)
    if bundled.exists():
        return bundled
    raise InputError(f"file not found: {ref}")


def case_from_dict(doc, name="") -> Network:
    try:
        raw_buses = doc["buses"]
        raw_branches = doc["branches"]
    except (KeyError, TypeError):
        raise InputError("case must contain 'buses' and 'branches' arrays") from None
    ids = [int(b["id"]) for b in raw_buses]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate bus ids in case")
    pos = {ext: k for k, ext in enumerate(ids)}

    def idx(ext):
        try:
            return pos[int(ext)]
        except KeyError:
            raise InputError(f"reference to unknown bus {ext}") from None

    try:
        buses = tuple(Bus(**{**b, "id": pos[int(b["id"])]}) for b in raw_buses)
        branches = tuple(
            Branch(**{**br, "from_bus": idx(br["from_bus"]), "to_bus": idx(br["to_bus"])})
            for br in raw_branches
        )
        machines = tuple(Machine(**{**m, "bus": idx(m["bus"])}) for m in doc.get("machines", []))
    except TypeError as exc:
        raise InputError(f"bad case field: {exc}") from None
    slack = sum(b.kind == "slack" for b in buses)
    if slack != 1:
        raise InputError(f"case must have exactly one slack bus, found {slack}")
    net = Network(
        buses,
        branches,
        machines,
        base_mva=float(doc.get("base_mva", 100.0)),
        f_nominal_hz=float(doc.get("f_nominal_hz", 50.0)),
        name=doc.get("name", name),
        bus_ids=tuple(ids),
    )
    check_connected(net.n, net.branches)
    return net


def load_case(path) -> Network:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"case file not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return case_from_dict(doc, name=path.stem)


def case_to_dict(net: Network) -> dict:
    from dataclasses import asdict

    ext = net.bus_ids
    return {
        "name": net.name,
        "base_mva": net.base_mva,
        "f_nominal_hz": net.f_nominal_hz,
        "buses": [{**asdict(b), "id": ext[b.id]} for b in net.buses],
        "branches": [
            {**asdict(br), "from_bus": ext[br.from_bus], "to_bus": ext[br.to_bus]}
            for br in net.branches
        ],
        "machines": [{**asdict(m), "bus": ext[m.bus]} for m in net.machines],
    }


def ieee14() -> Network:
    """The bundled IEEE 14-bus case."""
    return load_case(bundled_case_path("ieee14.json"))


def scale_resistances(net: Network, factor) -> Network:
    return net.replace(branches=tuple(replace(br, r=br.r * factor) for br in net.branches))


def remove_taps(net: Network) -> Network:
    return net.replace(branches=tuple(replace(br, tap=1.0) for br in net.branches))


def random_network(rng, n_buses, n_machines=2, extra_branches=None, load=0.02) -> Network:
    """Connected random test network: a random spanning tree plus chords.

    Machines sit on the first ``n_machines`` buses (bus 0 is the slack, the
    others PV); every other bus carries a small PQ load.
    """
    if not 1 <= n_machines <= n_buses:
        raise InputError("need 1 <= n_machines <= n_buses")
    extra = n_buses // 2 if extra_branches is None else extra_branches
    buses = []
    for k in range(n_buses):
        kind = "slack" if k == 0 else ("PV" if k < n_machines else "PQ")
        pl = 0.0 if k < n_machines else load * rng.uniform(0.5, 1.5)
        buses.append(Bus(k, kind, 1.0, pl, 0.3 * pl))
    pairs = set()
    branches = []

    def add(a, b):
        key = (min(a, b), max(a, b))
        if a != b and key not in pairs:
            pairs.add(key)
            branches.append(Branch(a, b, rng.uniform(0.005, 0.05), rng.uniform(0.05, 0.3), rng.uniform(0.0, 0.05)))

    order = rng.permutation(n_buses)
    for i in range(1, n_buses):
        add(int(order[i]), int(order[rng.integers(0, i)]))
    for _ in range(extra):
        add(int(rng.integers(0, n_buses)), int(rng.integers(0, n_buses)))
    total = sum(b.p_load for b in buses)
    share = total / max(n_machines - 1, 1)
    for k in range(1, n_machines):
        buses[k] = replace(buses[k], p_gen=0.5 * share)
    machines = tuple(Machine(k, float(rng.uniform(5.0, 15.0)), float(rng.uniform(0.1, 0.4))) for k in range(n_machines))
    return Network(tuple(buses), tuple(branches), machines, name=f"random{n_buses}")
