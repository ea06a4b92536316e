"""Frequency divider and center-of-inertia (CoI) weights.

Machine speeds and bus frequencies (pu, 1.0 = nominal) are tied by

    B_bg (omega_g - 1_m) = [B_bus + B_g] (omega - 1_n)

where ``B_g = diag(-1/x_internal)`` at machine buses and ``B_bg`` is the
``n x m`` matrix with ``-1/x_internal`` at (machine bus, machine). Both are
the imaginary parts of the machine admittances ``1/(j x)``. Without
shunts (``B_bus 1 = 0``) a uniform speed change therefore maps onto the
same uniform bus frequency change and ``alpha`` is zero; shunts and line
charging make ``alpha`` nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InputError
from .netmodel import AdmittanceSet, Network, network_admittance

PINV_RTOL = 1e-10


@dataclass(frozen=True)
class DividerMatrices:
    B_bb: np.ndarray
    B_g: np.ndarray
    B_bg: np.ndarray
    B_bg_pinv: np.ndarray
    svd_tolerance: float = PINV_RTOL

    @property
    def n(self):
        return self.B_bb.shape[0]

    @property
    def m(self):
        return self.B_bg.shape[1]


@dataclass(frozen=True)
class CoIWeights:
    c: np.ndarray
    alpha: float
    m_g: np.ndarray

    def __call__(self, omega):
        """CoI frequency from bus frequencies (pu), ``c^T omega + alpha``."""
        return self.c @ np.asarray(omega) + self.alpha


def build_divider(net: Network, admittance: AdmittanceSet | None = None) -> DividerMatrices:
    """Divider matrices for ``net``; ``admittance`` overrides the network Y_bus
    (e.g. to fold constant-admittance loads in)."""
    if not net.machines:
        raise InputError("the frequency divider needs at least one machine")
    adm = admittance if admittance is not None else network_admittance(net)
    n, m = net.n, len(net.machines)
    b_g = np.zeros((n, n))
    b_bg = np.zeros((n, m))
    for k, mach in enumerate(net.machines):
        b = -1.0 / mach.x_internal
        b_g[mach.bus, mach.bus] += b
        b_bg[mach.bus, k] = b
    b_bb = adm.b_bus + b_g
    pinv = np.linalg.pinv(b_bg, rtol=PINV_RTOL)
    return DividerMatrices(b_bb, b_g, b_bg, pinv, PINV_RTOL)


def coi_weights(div: DividerMatrices, machines) -> CoIWeights:
    """``c^T = m_g^T B_bg^+ [B_bus + B_g]`` and
    ``alpha = m_g^T (1_m - B_bg^+ [B_bus + B_g] 1_n)``."""
    inertia = np.array([m.M for m in machines], dtype=float)
    if len(inertia) != div.m:
        raise DimensionMismatch("machine list does not match divider matrices")
    m_g = inertia / inertia.sum()
    t = div.B_bg_pinv @ div.B_bb
    c = m_g @ t
    alpha = float(m_g @ (np.ones(div.m) - t @ np.ones(div.n)))
    return CoIWeights(c, alpha, m_g)


def weights_for(net: Network, admittance=None) -> CoIWeights:
    return coi_weights(build_divider(net, admittance), net.machines)


def coi_from_machines(machines, omega_g):
    """Inertia-weighted mean of machine speeds. ``omega_g`` may be ``(m, T)``."""
    inertia = np.array([m.M for m in machines], dtype=float)
    omega_g = np.asarray(omega_g, dtype=float)
    if omega_g.shape[0] != len(inertia):
        raise DimensionMismatch("one speed per machine expected")
    return inertia @ omega_g / inertia.sum()


def machine_speeds_from_bus(div: DividerMatrices, omega_bus):
    """``omega_g = B_bg^+ [B_bus + B_g] (omega - 1_n) + 1_m``."""
    omega_bus = np.asarray(omega_bus, dtype=float)
    if omega_bus.shape[0] != div.n:
        raise DimensionMismatch("one frequency per bus expected")
    dev = omega_bus - 1.0
    return div.B_bg_pinv @ (div.B_bb @ dev) + 1.0


def bus_from_machine_speeds(div: DividerMatrices, omega_g):
    """Frequency divider proper: bus frequencies from machine speeds."""
    omega_g = np.asarray(omega_g, dtype=float)
    return np.linalg.solve(div.B_bb, div.B_bg @ (omega_g - 1.0)) + 1.0


def coi_deviation(sens, weights: CoIWeights, p_dot, q_dot, omega_base=1.0):
    """``c^T [H p_dot + K q_dot]`` scaled to pu by ``omega_base``."""
    omega = sens.H @ np.asarray(p_dot, dtype=float) + sens.K @ np.asarray(q_dot, dtype=float)
    return weights.c @ omega / omega_base


def coi_estimate(sens, weights: CoIWeights, p_dot, q_dot, omega_base=1.0):
    """``omega_CoI = c^T [H p_dot + K q_dot] + alpha``.

    The bracket is a deviation from nominal, so the quiescent value is
    ``alpha``; add ``c^T 1_n`` (i.e. use ``1 + coi_deviation``) for the
    absolute pu level.
    """
    return coi_deviation(sens, weights, p_dot, q_dot, omega_base) + weights.alpha


def coi_deviation_simplified(b_inv, weights: CoIWeights, p_dot, omega_base=1.0):
    """Lossless transmission form, ``-c^T B_bus^-1 p_dot``."""
    return -(weights.c @ (b_inv @ np.asarray(p_dot, dtype=float))) / omega_base


def coi_estimate_simplified(b_inv, weights: CoIWeights, p_dot, omega_base=1.0):
    return coi_deviation_simplified(b_inv, weights, p_dot, omega_base) + weights.alpha
