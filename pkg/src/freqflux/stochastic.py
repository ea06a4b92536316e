"""Stochastic injections and their propagation to the CoI frequency.

Injection noise is an Ornstein-Uhlenbeck process integrated with
Euler-Maruyama (Ito),

    x_{k+1} = x_k - lam (x_k - mu) dt + sigma sqrt(dt) N(0, 1),

optionally pushed through a Gaussian copula to obtain a Weibull marginal.
Increments ``dp_k = p_{k+1} - p_k`` map linearly onto CoI frequency
increments, ``d omega = c^T [H dp + K dq]`` (or ``-c^T B^-1 dp``). Nothing
here differentiates a series: the increments themselves are propagated.

Randomness: every (path, source, component) triple owns a Philox stream
keyed by ``SeedSequence(base_seed, spawn_key=(path, source, component))``,
so a path is the same whichever worker runs it and in whatever order.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal, special

from ._moments import Moments, tree_merge
from .coi import CoIWeights, weights_for
from .errors import DimensionMismatch, InputError, UnstableStep
from .netmodel import Network, load_case, resolve_case
from .powerflow import solve_power_flow
from .sensitivity import no_load_sensitivities, sensitivities_at, simplified_at

log = logging.getLogger(__name__)

MAX_LAM_DT = 0.1
NOISE_KINDS = ("ou_gaussian", "ou_weibull_mapped")
TARGETS = ("p", "q", "both")


@dataclass(frozen=True)
class NoiseModel:
    """Noise on one injection. ``bus`` is the internal (0-based) index."""

    bus: int
    target: str = "p"
    kind: str = "ou_gaussian"
    lam: float = 1.0
    sigma: float = 0.01
    mean: float = 0.0
    shape: float = 2.0
    scale: float = 0.05
    mirror: bool = False

    def __post_init__(self):
        if self.target not in TARGETS:
            raise InputError(f"noise target must be one of {TARGETS}")
        if self.kind not in NOISE_KINDS:
            raise InputError(f"noise kind must be one of {NOISE_KINDS}")
        if not self.lam > 0 or self.sigma < 0:
            raise InputError("noise needs lam > 0 and sigma >= 0")
        if self.kind == "ou_weibull_mapped" and not (self.shape > 0 and self.scale > 0):
            raise InputError("Weibull noise needs shape > 0 and scale > 0")

    @property
    def components(self):
        return ("p", "q") if self.target == "both" else (self.target,)

    def level_variance(self, dt=0.0):
        """Variance of the stationary marginal (Euler-Maruyama exact for ``dt > 0``)."""
        if self.kind == "ou_gaussian":
            return self.sigma**2 / (self.lam * (2.0 - self.lam * dt))
        g1 = special.gamma(1 + 1 / self.shape)
        g2 = special.gamma(1 + 2 / self.shape)
        return self.scale**2 * (g2 - g1**2)

    def marginal_skewness(self):
        if self.kind == "ou_gaussian":
            return 0.0
        s = weibull_skewness(self.shape)
        return -s if self.mirror else s


def weibull_skewness(k):
    g1, g2, g3 = (special.gamma(1 + i / k) for i in (1, 2, 3))
    return (g3 - 3 * g1 * g2 + 2 * g1**3) / (g2 - g1**2) ** 1.5


def stream(base_seed, *key):
    """Counter-based generator for one (path, source, component) key."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _check_step(lam, dt):
    if not dt > 0:
        raise InputError("dt must be positive")
    if lam * dt >= MAX_LAM_DT:
        raise UnstableStep(f"lam*dt = {lam * dt:.3g} >= {MAX_LAM_DT}; reduce dt")


def _ou_recursion(a, drift, scale, x0, eps):
    u = drift + scale * eps
    y = signal.lfilter([1.0], [1.0, -a], u, zi=[a * x0])[0]
    return np.concatenate(([x0], y))


def euler_maruyama_ou(model: NoiseModel, dt, n_steps, rng, x0=None):
    """Levels (``n_steps + 1``) and increments (``n_steps``) of an OU path.

    ``x0`` defaults to a draw from the stationary law of the discretised
    process, so the marginal is stationary from the first sample.
    """
    _check_step(model.lam, dt)
    a = 1.0 - model.lam * dt
    if x0 is None:
        x0 = model.mean + np.sqrt(model.level_variance(dt)) * rng.standard_normal()
    eps = rng.standard_normal(n_steps)
    x = _ou_recursion(a, model.lam * model.mean * dt, model.sigma * np.sqrt(dt), float(x0), eps)
    return x, np.diff(x)


def skewed_noise(model: NoiseModel, dt, n_steps, rng):
    """OU path with a Weibull(shape, scale) marginal via a Gaussian copula.

    A stationary zero-mean OU path is standardised, mapped through the
    normal CDF and then through the Weibull quantile function. With
    ``mirror`` the result is reflected about the Weibull mean.
    """
    base = NoiseModel(model.bus, model.target, "ou_gaussian", model.lam, model.sigma or 1.0)
    x, _ = euler_maruyama_ou(base, dt, n_steps, rng)
    z = x / np.sqrt(base.level_variance(dt))
    # -log(1 - Phi(z)) computed as -log Phi(-z) keeps the upper tail accurate
    y = model.scale * (-special.log_ndtr(-z)) ** (1.0 / model.shape)
    if model.mirror:
        y = 2.0 * model.scale * special.gamma(1 + 1 / model.shape) - y
    return y, np.diff(y)


def noise_path(model: NoiseModel, dt, n_steps, rng):
    if model.kind == "ou_gaussian":
        return euler_maruyama_ou(model, dt, n_steps, rng)
    return skewed_noise(model, dt, n_steps, rng)


@dataclass(frozen=True)
class PropagationMap:
    """Per-bus scalar weights from injection increments to CoI frequency (pu)."""

    w_p: np.ndarray
    w_q: np.ndarray
    mode: str
    omega_base: float
    weights: CoIWeights | None = None

    def weight(self, bus, component):
        return (self.w_p if component == "p" else self.w_q)[bus]

    def source_weights(self, noise):
        return np.array([self.weight(m.bus, c) for m in noise for c in m.components])


def propagation_map(net: Network, mode="full", at="solved", op=None) -> PropagationMap:
    """Build the increment map of ``net``.

    ``mode='full'`` uses ``c^T H`` and ``c^T K`` at the operating point
    (``at='solved'`` runs a power flow, ``at='no_load'`` uses the flat
    unloaded point); ``mode='simplified'`` uses ``-c^T B^-1`` and ignores
    reactive increments.
    """
    weights = weights_for(net)
    wb = net.omega_base
    if mode == "full":
        if at == "no_load":
            sens = no_load_sensitivities(net)
        else:
            sens = sensitivities_at(net, op or solve_power_flow(net))
        w_p, w_q = weights.c @ sens.H / wb, weights.c @ sens.K / wb
    elif mode == "simplified":
        simp = simplified_at(net)
        w_p, w_q = -(weights.c @ simp.B_inv) / wb, np.zeros(net.n)
    else:
        raise InputError(f"unknown propagation mode {mode!r}")
    return PropagationMap(w_p, w_q, mode, wb, weights)


def propagate_increments(pmap: PropagationMap, dp, dq=None):
    """CoI frequency increments from bus increment series.

    ``dp``/``dq`` are ``(T, n)`` (or ``(n,)``) arrays on a common grid;
    ``dq`` may be omitted when there is no reactive noise.
    """
    dp = np.asarray(dp, dtype=float)
    n = len(pmap.w_p)
    if dp.shape[-1] != n:
        raise DimensionMismatch(f"increments have {dp.shape[-1]} buses, map has {n}")
    out = dp @ pmap.w_p
    if dq is not None:
        dq = np.asarray(dq, dtype=float)
        if dq.shape != dp.shape:
            raise DimensionMismatch("dp and dq are not on the same grid")
        out = out + dq @ pmap.w_q
    return out


# ---------------------------------------------------------------------------
# scenarios and ensembles


@dataclass(frozen=True)
class Scenario:
    network: Network
    noise: tuple[NoiseModel, ...]
    dt: float = 0.01
    t_end: float = 100.0
    n_paths: int = 1
    base_seed: int = 0
    propagation: str = "full"
    operating_point: str = "solved"
    name: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


def scenario_from_dict(doc, base_dir=None) -> Scenario:
    try:
        net = load_case(resolve_case(doc["case"], base_dir))
        noise = tuple(
            NoiseModel(**{**nm, "bus": net.index(int(nm["bus"]))}) for nm in doc.get("noise", [])
        )
    except KeyError as exc:
        raise InputError(f"scenario is missing {exc}") from None
    except TypeError as exc:
        raise InputError(f"bad noise field: {exc}") from None
    known = {"case", "noise", "dt", "t_end", "n_paths", "base_seed", "propagation", "operating_point", "name"}
    if "base_seed" not in doc:
        raise InputError("stochastic scenarios need a base_seed")
    return Scenario(
        net,
        noise,
        dt=float(doc.get("dt", 0.01)),
        t_end=float(doc.get("t_end", 100.0)),
        n_paths=int(doc.get("n_paths", 1)),
        base_seed=int(doc["base_seed"]),
        propagation=doc.get("propagation", "full"),
        operating_point=doc.get("operating_point", "solved"),
        name=doc.get("name", ""),
        extra={k: v for k, v in doc.items() if k not in known},
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc, base_dir=path.parent)


@dataclass
class SamplePath:
    seed: tuple
    t: np.ndarray
    levels: np.ndarray
    increments: np.ndarray
    labels: list
    d_omega_coi: np.ndarray
    omega_coi: np.ndarray


def simulate_path(scenario: Scenario, pmap: PropagationMap, path=0) -> SamplePath:
    """One realisation. Source columns follow ``scenario.noise`` order, with
    ``p`` before ``q`` for ``both`` targets."""
    n = scenario.n_steps
    levels, incs, labels = [], [], []
    for j, model in enumerate(scenario.noise):
        for ci, comp in enumerate(model.components):
            x, dx = noise_path(model, scenario.dt, n, stream(scenario.base_seed, path, j, ci))
            levels.append(x)
            incs.append(dx)
            labels.append((model.bus, comp))
    levels = np.array(levels).T if levels else np.zeros((n + 1, 0))
    incs = np.array(incs).T if incs else np.zeros((n, 0))
    w = pmap.source_weights(scenario.noise)
    d_omega = incs @ w
    return SamplePath(
        seed=(scenario.base_seed, path),
        t=np.arange(n + 1) * scenario.dt,
        levels=levels,
        increments=incs,
        labels=labels,
        d_omega_coi=d_omega,
        omega_coi=np.cumsum(d_omega),
    )


@dataclass
class Ensemble:
    summaries: list
    d_omega: np.ndarray
    omega: np.ndarray
    moments_d_omega: Moments
    moments_omega: Moments
    pmap: PropagationMap
    source_weights: np.ndarray


def scenario_map(scenario: Scenario) -> PropagationMap:
    return propagation_map(scenario.network, scenario.propagation, scenario.operating_point)


def monte_carlo(scenario: Scenario, n_paths=None, base_seed=None, threads=1, pmap=None) -> Ensemble:
    """Run independent paths and pool their CoI samples.

    ``d_omega`` pools the per-step CoI increments, ``omega`` the CoI
    deviation (running sum of increments) of every path, both in path
    order. Moments are merged with a fixed pairwise tree, so the result
    does not depend on ``threads``.
    """
    from dataclasses import replace

    if n_paths is not None or base_seed is not None:
        scenario = replace(
            scenario,
            n_paths=scenario.n_paths if n_paths is None else int(n_paths),
            base_seed=scenario.base_seed if base_seed is None else int(base_seed),
        )
    if scenario.n_paths < 1:
        raise InputError("n_paths must be >= 1")
    pmap = pmap or scenario_map(scenario)

    def run(i):
        sp = simulate_path(scenario, pmap, i)
        return sp, Moments.of(sp.d_omega_coi), Moments.of(sp.omega_coi)

    idx = range(scenario.n_paths)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, idx))
    else:
        results = [run(i) for i in idx]

    summaries = []
    for i, (sp, md, mo) in enumerate(results):
        summaries.append(
            {
                "path": i,
                "base_seed": scenario.base_seed,
                "n": md.n,
                "d_omega_mean": md.mean,
                "d_omega_var": md.variance,
                "d_omega_skew": md.skewness,
                "d_omega_kurt": md.excess_kurtosis,
                "omega_mean": mo.mean,
                "omega_var": mo.variance,
                "omega_skew": mo.skewness,
                "omega_kurt": mo.excess_kurtosis,
            }
        )
    return Ensemble(
        summaries,
        np.concatenate([r[0].d_omega_coi for r in results]),
        np.concatenate([r[0].omega_coi for r in results]),
        tree_merge(r[1] for r in results),
        tree_merge(r[2] for r in results),
        pmap,
        pmap.source_weights(scenario.noise),
    )
