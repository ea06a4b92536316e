"""Newton-Raphson AC power flow in polar coordinates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NoConvergence, SingularJacobian
from .netmodel import AdmittanceSet, Network, network_admittance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OperatingPoint:
    """Solved steady state: magnitudes (pu), angles (rad), net injections (pu)."""

    v: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.v)
        if not (len(self.theta) == len(self.p) == len(self.q) == n):
            raise DimensionMismatch("operating point vectors differ in length")

    @property
    def u(self):
        """Log-magnitudes, ``u = log v``."""
        return np.log(self.v)

    @property
    def voltage(self):
        return self.v * np.exp(1j * self.theta)


@dataclass(frozen=True)
class PowerFlowOptions:
    tol: float = 1e-8
    max_iter: int = 50
    flat_start: bool = True


def branch_flow_terms(v, theta, g, b):
    """Element-wise flow terms ``P_hk``, ``Q_hk``.

    P_hk = v_h v_k (G_hk cos th_hk + B_hk sin th_hk)
    Q_hk = v_h v_k (G_hk sin th_hk - B_hk cos th_hk)
    """
    v = np.asarray(v, dtype=float)
    th = np.subtract.outer(theta, theta)
    vv = np.outer(v, v)
    c, s = np.cos(th), np.sin(th)
    return vv * (g * c + b * s), vv * (g * s - b * c)


def injections_from_state(admittance: AdmittanceSet, v, theta):
    """Net injections ``p_h = sum_k P_hk`` and ``q_h = sum_k Q_hk``."""
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if v.shape != theta.shape or v.shape[0] != admittance.n:
        raise DimensionMismatch("state vectors do not match the admittance matrix")
    P, Q = branch_flow_terms(v, theta, admittance.g_bus, admittance.b_bus)
    return P.sum(axis=1), Q.sum(axis=1)


def _specified(net: Network):
    p = net.array("p_gen") - net.array("p_load")
    q = -net.array("q_load")
    return p, q


def solve_power_flow(net: Network, options: PowerFlowOptions | None = None, v0=None, theta0=None):
    """Solve the power flow of ``net``.

    Slack and PV buses hold their voltage set-points; PV buses inject
    ``p_gen - p_load``, PQ buses ``-p_load, -q_load``. The returned point
    carries the iteration count and final mismatch in ``meta``.
    """
    opts = options or PowerFlowOptions()
    adm = network_admittance(net)
    y = adm.y_bus
    kinds = net.kinds()
    pv = np.flatnonzero(kinds == "PV")
    pq = np.flatnonzero(kinds == "PQ")
    pvpq = np.r_[pv, pq]
    p_spec, q_spec = _specified(net)

    vm = np.ones(net.n) if v0 is None else np.array(v0, dtype=float)
    va = np.zeros(net.n) if theta0 is None else np.array(theta0, dtype=float)
    vset = net.array("v_setpoint")
    gen = kinds != "PQ"
    vm[gen] = vset[gen]
    V = vm * np.exp(1j * va)

    def mismatch(V):
        s = V * np.conj(y @ V)
        return np.r_[s.real[pvpq] - p_spec[pvpq], s.imag[pq] - q_spec[pq]]

    f = mismatch(V)
    err = np.max(np.abs(f)) if f.size else 0.0
    it = 0
    while err > opts.tol:
        if it >= opts.max_iter:
            raise NoConvergence(it, err)
        i_bus = y @ V
        dv = V / np.abs(V)
        ds_dth = 1j * np.diag(V) @ np.conj(np.diag(i_bus) - y @ np.diag(V))
        ds_dvm = np.diag(V) @ np.conj(y @ np.diag(dv)) + np.conj(np.diag(i_bus)) @ np.diag(dv)
        jac = np.block(
            [
                [ds_dth.real[np.ix_(pvpq, pvpq)], ds_dvm.real[np.ix_(pvpq, pq)]],
                [ds_dth.imag[np.ix_(pq, pvpq)], ds_dvm.imag[np.ix_(pq, pq)]],
            ]
        )
        try:
            dx = linalg.solve(jac, -f)
        except linalg.LinAlgError:
            raise SingularJacobian(f"singular Jacobian at iteration {it}") from None
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian(f"non-finite Newton step at iteration {it}")
        va[pvpq] += dx[: len(pvpq)]
        vm[pq] += dx[len(pvpq) :]
        V = vm * np.exp(1j * va)
        f = mismatch(V)
        err = np.max(np.abs(f))
        it += 1
        log.debug("NR iteration %d: max mismatch %.3e", it, err)

    p, q = injections_from_state(adm, vm, va)
    return OperatingPoint(vm.copy(), va.copy(), p, q, meta={"iterations": it, "mismatch": err})


def load_injections(net: Network, op: OperatingPoint):
    """Injections of everything except the machines' internal sources.

    At machine buses this is minus the local load; elsewhere it equals the
    net injection. These are the injections whose rates drive bus
    frequencies once machine internal admittances are part of the network.
    """
    p = op.p.copy()
    q = op.q.copy()
    mb = net.machine_buses
    p[mb] = -net.array("p_load")[mb]
    q[mb] = -net.array("q_load")[mb]
    return p, q


def total_load(net: Network):
    return float(net.array("p_load").sum())


def flat_state(net: Network):
    """No-load flat operating point (v = 1, theta = 0, zero load injections)."""
    n = net.n
    adm = network_admittance(net)
    v, th = np.ones(n), np.zeros(n)
    p, q = injections_from_state(adm, v, th)
    return OperatingPoint(v, th, p, q, meta={"flat": True})
