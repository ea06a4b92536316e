"""Complex-frequency sensitivity matrices.

Linearising the injections around an operating point gives

    p_dot = A rho + B omega
    q_dot = C rho + D omega

with ``A = diag(p) + P``, ``B = -diag(q) + Q``, ``C = diag(q) + Q`` and
``D = diag(p) - P`` (``P``, ``Q`` the branch flow terms). Eliminating
``rho`` yields ``omega = H p_dot + K q_dot``.

Here ``rho`` is the log-magnitude rate (1/s) and ``omega`` the angle
rate (rad/s) in the frame rotating at nominal speed, so the voltage
magnitude chain rule ``dv/du = diag(v)`` is already folded into the
matrices. Divide ``omega`` by the nominal angular frequency to get pu.

A note on the reference: with the bare network admittance, a uniform
rotation of all bus angles leaves every injection unchanged, so ``F`` has
the all-ones vector in its kernel. :func:`sensitivities_at` therefore
builds the flow terms on ``Y_bus + Y_g`` (machine EMFs held fixed) and
uses load-side injections, which is the setting the frequency divider
lives in too.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import SINGULAR_COND, checked_inv, cond_estimate
from .errors import DimensionMismatch, SingularMatrix
from .netmodel import AdmittanceSet, Network, augmented_admittance, network_admittance
from .powerflow import OperatingPoint, branch_flow_terms, load_injections

log = logging.getLogger(__name__)

SIMPLIFIED_HINT = "use the simplified (IEC 60909) weights, e.g. `sensitivities --simplified`"


@dataclass(frozen=True)
class FlowMatrices:
    P: np.ndarray
    Q: np.ndarray

    @property
    def p(self):
        return self.P.sum(axis=1)

    @property
    def q(self):
        return self.Q.sum(axis=1)


@dataclass(frozen=True)
class SensitivitySet:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    H: np.ndarray
    K: np.ndarray
    C_inv: np.ndarray
    operating_point: OperatingPoint | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class ComplexFrequencyState:
    rho: np.ndarray
    omega: np.ndarray

    def omega_pu(self, omega_base):
        """Angle rates as per-unit deviations from nominal."""
        return self.omega / omega_base


def flow_matrices(op: OperatingPoint, admittance: AdmittanceSet) -> FlowMatrices:
    if len(op.v) != admittance.n:
        raise DimensionMismatch("operating point and admittance sizes differ")
    P, Q = branch_flow_terms(op.v, op.theta, admittance.g_bus, admittance.b_bus)
    return FlowMatrices(P, Q)


def _residual(a, b):
    return float(np.max(np.abs(a @ b - np.eye(a.shape[0]))))


def build_sensitivities(flow: FlowMatrices, op: OperatingPoint, p=None, q=None) -> SensitivitySet:
    """Assemble A..K at ``op``.

    ``p``, ``q`` default to the operating point injections. Pass the
    load-side injections when ``flow`` was built on an augmented
    admittance (see :func:`sensitivities_at`).

    Raises
    ------
    SingularMatrix
        If ``C`` or ``F`` cannot be inverted; the exception carries the
        condition estimate. ``C`` is singular at exact no-load on a
        network without shunts.
    """
    p = op.p if p is None else np.asarray(p, dtype=float)
    q = op.q if q is None else np.asarray(q, dtype=float)
    P, Q = flow.P, flow.Q
    A = np.diag(p) + P
    B = -np.diag(q) + Q
    C = np.diag(q) + Q
    D = np.diag(p) - P

    C_inv, cond_c = checked_inv(C, "C", hint=SIMPLIFIED_HINT)
    E = A @ C_inv
    F = B - E @ D
    H, cond_f = checked_inv(F, "F", hint=SIMPLIFIED_HINT)
    K = -H @ E

    meta = {
        "cond_C": cond_c,
        "cond_F": cond_f,
        "residual_FH": _residual(F, H),
        "residual_CCinv": _residual(C, C_inv),
    }
    scale = max(np.max(np.abs(A)), 1.0)
    meta["residual_E"] = float(np.max(np.abs(E @ C - A))) / scale
    return SensitivitySet(A, B, C, D, E, F, H, K, C_inv, op, meta)


def sensitivities_at(net: Network, op: OperatingPoint, augment=True, p=None, q=None) -> SensitivitySet:
    """Sensitivities of the load-side injections of ``net`` at ``op``.

    With ``augment`` (default) the machine internal admittances are added to
    the network and ``p``, ``q`` default to the load-side injections.
    """
    adm = network_admittance(net)
    if augment:
        adm = augmented_admittance(adm, net.machines)
        p_l, q_l = load_injections(net, op)
    else:
        p_l, q_l = op.p, op.q
    p = p_l if p is None else p
    q = q_l if q is None else q
    sens = build_sensitivities(flow_matrices(op, adm), op, p, q)
    sens.meta["augmented"] = augment
    return sens


def no_load_sensitivities(net: Network) -> SensitivitySet:
    """Sensitivities at the flat, unloaded point (v = 1, theta = 0, p = q = 0)."""
    n = net.n
    zero = np.zeros(n)
    op = OperatingPoint(np.ones(n), zero, zero, zero, meta={"flat": True})
    return sensitivities_at(net, op, p=zero, q=zero)


def forward_rates(sens: SensitivitySet, rho, omega):
    """Injection rates produced by a complex-frequency state."""
    return sens.A @ rho + sens.B @ omega, sens.C @ rho + sens.D @ omega


def bus_frequencies(sens: SensitivitySet, p_dot, q_dot) -> ComplexFrequencyState:
    """``omega = H p_dot + K q_dot`` and ``rho = C^-1 (q_dot - D omega)``.

    Works column-wise on ``(n, T)`` arrays too.
    """
    p_dot = np.asarray(p_dot, dtype=float)
    q_dot = np.asarray(q_dot, dtype=float)
    if p_dot.shape[0] != sens.n or q_dot.shape != p_dot.shape:
        raise DimensionMismatch("rate vectors do not match the sensitivity set")
    omega = sens.H @ p_dot + sens.K @ q_dot
    rho = sens.C_inv @ (q_dot - sens.D @ omega)
    return ComplexFrequencyState(rho, omega)


@dataclass(frozen=True)
class SimplifiedWeights:
    """IEC 60909 style sensitivities built from the admittance alone."""

    H: np.ndarray
    K: np.ndarray
    B_inv: np.ndarray
    lossless: bool
    meta: dict = field(default_factory=dict, compare=False)


def simplified_weights(admittance: AdmittanceSet, machines=(), lossless_ratio=1e-6, cond_limit=SINGULAR_COND):
    """Sensitivities under the transmission-level simplifications.

    Taking ``A ~ G``, ``B = C ~ -B_bus`` and ``D = -A`` gives
    ``E = -G B^-1``, ``F = -B - G B^-1 G``, ``H = F^-1`` and
    ``K = H G B^-1``. When ``||G|| / ||B||`` is below ``lossless_ratio`` the
    lossless forms ``H = -B^-1``, ``K = 0`` are returned instead.

    A (near-)singular ``B_bus`` is augmented with the machine internal
    susceptances (with a warning) when ``machines`` are given.
    """
    g, b = admittance.g_bus, admittance.b_bus
    meta = {"augmented": False}
    cond_b = cond_estimate(b)
    if not np.isfinite(cond_b) or cond_b > cond_limit:
        if not machines:
            raise SingularMatrix(
                "B_bus", cond_b, "pass machines to augment with internal susceptances B_g"
            )
        aug = augmented_admittance(admittance, machines)
        warnings.warn(
            f"B_bus condition estimate {cond_b:.2e}; augmented with machine susceptances B_g",
            RuntimeWarning,
            stacklevel=2,
        )
        g, b = aug.g_bus, aug.b_bus
        meta["augmented"] = True
    b_inv, cond_b = checked_inv(b, "B_bus", cond_limit)
    meta["cond_B"] = cond_b
    ratio = np.linalg.norm(g, np.inf) / np.linalg.norm(b, np.inf)
    meta["g_over_b"] = ratio
    if ratio < lossless_ratio:
        return SimplifiedWeights(-b_inv, np.zeros_like(b), b_inv, True, meta)
    f = -b - g @ b_inv @ g
    h, meta["cond_F"] = checked_inv(f, "F", cond_limit)
    k = h @ g @ b_inv
    return SimplifiedWeights(h, k, b_inv, False, meta)


def simplified_at(net: Network, augment=True, **kwargs) -> SimplifiedWeights:
    """Simplified weights for ``net``, on ``Y_bus + Y_g`` by default."""
    adm = network_admittance(net)
    if augment:
        adm = augmented_admittance(adm, net.machines)
        return simplified_weights(adm, **kwargs)
    return simplified_weights(adm, net.machines, **kwargs)
