"""Classical-machine time-domain simulation.

Each machine is a constant EMF behind ``x_internal`` with second-order
swing dynamics::

    delta' = omega_s (omega_g - 1)
    M omega_g' = P_m - P_e - D (omega_g - 1)

Loads are constant admittances fixed at the initial power flow; events
change load admittances. The network is linear in the EMFs, so every
algebraic solve is a single complex linear system. Integration is explicit
trapezoidal (Heun), second order.

The resulting trajectory is the reference against which the
injection-rate CoI estimators are checked.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .coi import build_divider, coi_from_machines, coi_weights
from .errors import InputError, StepRejected, TooFewSamples
from .netmodel import Network, augmented_admittance, network_admittance
from .powerflow import OperatingPoint, solve_power_flow
from .sensitivity import sensitivities_at, simplified_at

log = logging.getLogger(__name__)

MAX_DT = 0.01


@dataclass(frozen=True)
class Event:
    """Load change at ``bus`` (internal index).

    ``load_ramp`` adds ``rate`` pu/s of constant-admittance load (at 1 pu
    voltage) for ``duration`` seconds from ``t_start``; ``load_step`` adds
    ``rate`` pu at ``t_start``. ``q_ratio`` sets the reactive part as a
    fraction of the active part.
    """

    kind: str
    bus: int
    rate: float
    t_start: float = 0.0
    duration: float = 0.0
    q_ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in ("load_ramp", "load_step"):
            raise InputError(f"unknown event kind {self.kind!r}")
        if self.t_start < 0:
            raise InputError("event t_start must be >= 0")
        if self.kind == "load_ramp" and not self.duration > 0:
            raise InputError("ramp events need duration > 0")

    def added_power(self, t):
        if self.kind == "load_ramp":
            return self.rate * np.clip(t - self.t_start, 0.0, self.duration)
        return self.rate if t >= self.t_start else 0.0

    def admittance(self, t):
        dp = self.added_power(t)
        return dp * (1.0 - 1j * self.q_ratio)


_EVENT_KEYS = {"bus", "rate", "t0", "dur", "q"}


def parse_event(text, net: Network) -> Event:
    """Parse ``ramp:bus=4,rate=0.1,t0=10,dur=10[,q=0.2]`` or ``step:bus=4,rate=0.5,t0=1``.

    ``bus`` is the external bus number.
    """
    m = re.fullmatch(r"\s*(ramp|step)\s*:(.*)", text)
    if not m:
        raise InputError(f"bad event spec {text!r}")
    kind, body = m.groups()
    fields = {}
    for part in body.split(","):
        if not part.strip():
            continue
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in _EVENT_KEYS:
            raise InputError(f"unknown event field {key!r}")
        try:
            fields[key] = float(val)
        except ValueError:
            raise InputError(f"bad value for {key}: {val!r}") from None
    if "bus" not in fields or "rate" not in fields:
        raise InputError("event needs bus= and rate=")
    return Event(
        "load_ramp" if kind == "ramp" else "load_step",
        net.index(int(fields["bus"])),
        fields["rate"],
        fields.get("t0", 0.0),
        fields.get("dur", 0.0),
        fields.get("q", 0.0),
    )


@dataclass(frozen=True)
class MachineDynState:
    delta: np.ndarray
    omega_g: np.ndarray
    e_internal: np.ndarray
    p_mech: np.ndarray
    damping: np.ndarray


@dataclass
class Trajectory:
    """Sampled simulation output. Per-bus arrays are ``(T, n)``, per-machine ``(T, m)``.

    ``p`` and ``q`` are load-side injections (everything except machine
    sources), the quantities whose rates drive the estimators.
    """

    t: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    q: np.ndarray
    delta: np.ndarray
    omega_g: np.ndarray
    kinetic_energy: np.ndarray
    omega_coi_true: np.ndarray
    omega_bus: np.ndarray | None = None
    p_dot: np.ndarray | None = None
    q_dot: np.ndarray | None = None
    omega_coi_est_full: np.ndarray | None = None
    omega_coi_est_simplified: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    def __len__(self):
        return len(self.t)


class _Plant:
    def __init__(self, net: Network, op: OperatingPoint, events):
        self.net = net
        self.events = tuple(events)
        n = net.n
        adm = network_admittance(net)
        v0 = op.voltage
        s_load = net.array("p_load") + 1j * net.array("q_load")
        self.y_load = np.conj(s_load) / op.v**2
        self.y_base = augmented_admittance(adm, net.machines).y_bus + np.diag(self.y_load)
        self.mb = net.machine_buses
        if len(set(self.mb)) != len(self.mb):
            raise InputError("dynsim supports one machine per bus")
        self.y_g = np.array([1.0 / (1j * m.x_internal) for m in net.machines])
        self.M = net.inertia
        self.D = np.array([m.damping for m in net.machines])
        self.omega_s = net.omega_base
        s_net = op.p + 1j * op.q
        s_gen = (s_net + s_load)[self.mb]
        i_g = np.conj(s_gen / v0[self.mb])
        e = v0[self.mb] + 1j * np.array([m.x_internal for m in net.machines]) * i_g
        self.e_mag = np.abs(e)
        self.p_mech = np.real(e * np.conj(i_g))
        self.delta0 = np.angle(e)
        self.n = n

    def y_event(self, t):
        dy = np.zeros(self.n, dtype=complex)
        for ev in self.events:
            dy[ev.bus] += ev.admittance(t)
        return dy

    def network(self, t, delta):
        e = self.e_mag * np.exp(1j * delta)
        rhs = np.zeros(self.n, dtype=complex)
        rhs[self.mb] = self.y_g * e
        y = self.y_base + np.diag(self.y_event(t))
        V = np.linalg.solve(y, rhs)
        i_g = self.y_g * (e - V[self.mb])
        p_e = np.real(e * np.conj(i_g))
        return V, p_e

    def rhs(self, t, delta, omega):
        _, p_e = self.network(t, delta)
        d_delta = self.omega_s * (omega - 1.0)
        d_omega = (self.p_mech - p_e - self.D * (omega - 1.0)) / self.M
        return d_delta, d_omega

    def load_side(self, t, V):
        y = self.y_load + self.y_event(t)
        s = -np.abs(V) ** 2 * np.conj(y)
        return s.real, s.imag


def simulate(net: Network, events=(), dt=0.005, t_end=40.0, op: OperatingPoint | None = None, estimators=True):
    """Integrate from the power-flow equilibrium to ``t_end``.

    With ``estimators`` the returned trajectory also carries injection
    derivatives, bus frequencies and both CoI estimates (frozen
    sensitivities); see :func:`attach_estimates`.
    """
    if not 0 < dt <= MAX_DT:
        raise InputError(f"dt must be in (0, {MAX_DT}] s")
    op = op or solve_power_flow(net)
    plant = _Plant(net, op, events)
    steps = int(round(t_end / dt))
    t = np.arange(steps + 1) * dt
    m = len(net.machines)
    delta = np.empty((steps + 1, m))
    omega = np.empty((steps + 1, m))
    delta[0], omega[0] = plant.delta0, 1.0
    for k in range(steps):
        d, w, tk = delta[k], omega[k], t[k]
        k1d, k1w = plant.rhs(tk, d, w)
        dp, wp = d + dt * k1d, w + dt * k1w
        k2d, k2w = plant.rhs(tk + dt, dp, wp)
        delta[k + 1] = d + 0.5 * dt * (k1d + k2d)
        omega[k + 1] = w + 0.5 * dt * (k1w + k2w)
        if not (np.all(np.isfinite(delta[k + 1])) and np.all(np.isfinite(omega[k + 1]))):
            raise StepRejected(f"non-finite state at t = {t[k + 1]:.4f} s")

    V = np.empty((steps + 1, net.n), dtype=complex)
    p = np.empty((steps + 1, net.n))
    q = np.empty((steps + 1, net.n))
    for k in range(steps + 1):
        V[k], _ = plant.network(t[k], delta[k])
        p[k], q[k] = plant.load_side(t[k], V[k])

    traj = Trajectory(
        t=t,
        v=np.abs(V),
        theta=np.angle(V),
        p=p,
        q=q,
        delta=delta,
        omega_g=omega,
        kinetic_energy=0.5 * (omega**2) @ plant.M,
        omega_coi_true=coi_from_machines(net.machines, omega.T),
        meta={"dt": dt, "t_end": t_end, "events": [ev.__dict__ for ev in plant.events], "p_mech": plant.p_mech},
    )
    if estimators:
        attach_estimates(traj, net, op)
    return traj


def differentiate(x, dt, scheme="central"):
    """Time derivative of sampled series along axis 0.

    ``central`` uses central differences inside and one-sided differences
    at the ends; ``backward`` uses ``(x_k - x_{k-1}) / dt`` with a forward
    difference at the first sample.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 3:
        raise TooFewSamples("need at least 3 samples to differentiate")
    if scheme == "central":
        return np.gradient(x, dt, axis=0, edge_order=1)
    if scheme == "backward":
        d = np.empty_like(x)
        d[1:] = (x[1:] - x[:-1]) / dt
        d[0] = d[1]
        return d
    raise InputError(f"unknown differentiation scheme {scheme!r}")


def differentiate_injections(traj: Trajectory, scheme="central"):
    return differentiate(traj.p, traj.dt, scheme), differentiate(traj.q, traj.dt, scheme)


def bus_frequency_from_angles(traj: Trajectory, omega_base, smooth=1):
    """``1 + theta_dot / omega_s`` by central differences of unwrapped angles,
    optionally smoothed with a centered moving average of ``smooth`` samples."""
    th = np.unwrap(traj.theta, axis=0)
    w = 1.0 + differentiate(th, traj.dt) / omega_base
    if smooth > 1:
        kernel = np.ones(smooth) / smooth
        w = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="same"), 0, w)
    return w


def attach_estimates(traj: Trajectory, net: Network, op: OperatingPoint, scheme="central", sens_mode="frozen"):
    """Fill derivatives, bus frequencies and the two CoI estimates (absolute pu)."""
    wb = net.omega_base
    traj.p_dot, traj.q_dot = differentiate_injections(traj, scheme)
    traj.omega_bus = bus_frequency_from_angles(traj, wb)
    weights = coi_weights(build_divider(net), net.machines)
    simp = simplified_at(net)
    if sens_mode == "frozen":
        sens = sensitivities_at(net, op)
        dev_full = (traj.p_dot @ sens.H.T + traj.q_dot @ sens.K.T) @ weights.c / wb
    elif sens_mode == "reevaluated":
        dev_full = np.empty(len(traj))
        for k in range(len(traj)):
            opk = OperatingPoint(traj.v[k], traj.theta[k], traj.p[k], traj.q[k])
            sk = sensitivities_at(net, opk, p=traj.p[k], q=traj.q[k])
            dev_full[k] = weights.c @ (sk.H @ traj.p_dot[k] + sk.K @ traj.q_dot[k]) / wb
    else:
        raise InputError(f"unknown sensitivity mode {sens_mode!r}")
    dev_simp = -(traj.p_dot @ simp.B_inv.T) @ weights.c / wb
    traj.omega_coi_est_full = 1.0 + dev_full
    traj.omega_coi_est_simplified = 1.0 + dev_simp
    traj.meta["sens_mode"] = sens_mode
    traj.meta["alpha"] = weights.alpha
    return traj


@dataclass(frozen=True)
class EstimatorReport:
    sens_mode: str
    rms_full: float
    rms_simplified: float
    max_full: float
    max_simplified: float
    divider_max_error: float

    @property
    def full_better(self):
        return self.rms_full <= self.rms_simplified


def compare_estimators(traj: Trajectory, net: Network, op: OperatingPoint | None = None, sens_mode="frozen", window=None):
    """RMS / max errors of both estimates against the machine-speed CoI.

    ``window`` = ``(t0, t1)`` restricts the statistics to part of the run.
    Also reports the largest gap between the machine CoI and the divider
    reading ``c^T omega_bus + alpha``.
    """
    if sens_mode != traj.meta.get("sens_mode") or traj.omega_coi_est_full is None:
        attach_estimates(traj, net, op or solve_power_flow(net), sens_mode=sens_mode)
    sel = slice(None)
    if window is not None:
        sel = (traj.t >= window[0]) & (traj.t <= window[1])
    truth = traj.omega_coi_true[sel]
    ef = traj.omega_coi_est_full[sel] - truth
    es = traj.omega_coi_est_simplified[sel] - truth
    weights = coi_weights(build_divider(net), net.machines)
    div = traj.omega_bus[sel] @ weights.c + weights.alpha - truth
    return EstimatorReport(
        sens_mode,
        float(np.sqrt(np.mean(ef**2))),
        float(np.sqrt(np.mean(es**2))),
        float(np.max(np.abs(ef))),
        float(np.max(np.abs(es))),
        float(np.max(np.abs(div))),
    )
