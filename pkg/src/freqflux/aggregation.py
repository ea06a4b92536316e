"""Aggregation of many small stochastic loads behind one transmission bus.

A radial subnetwork is grown below a host bus, small loads are scattered
over it and their OU-copula noise is propagated to the CoI frequency.
The same population is then re-run with one dominant load added, which is
enough to break the balance the Lindeberg condition asks for.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import LINDEBERG_THRESHOLD, StatsReport, _lindeberg_result, normality_report
from .netmodel import Branch, Bus, Network
from .stochastic import NoiseModel, noise_path, propagation_map, stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubnetSpec:
    """Parameters of the synthetic subnetwork experiment.

    ``dominant_variance_ratio`` is the variance of the dominant load
    relative to the summed variance of all small loads when
    ``dominant_reference == 'aggregate'``, or relative to one average small
    load when it is ``'single'``. ``None`` disables the dominant case.
    """

    n_buses: int = 1000
    n_loads: int = 2000
    attach_bus: int = 4
    load_p: float = 2e-4
    size_spread: float = 0.5
    q_ratio: float = 0.3
    r_range: tuple = (0.005, 0.02)
    x_range: tuple = (0.005, 0.02)
    lam: float = 2.0
    dt: float = 0.01
    n_samples: int = 100_000
    small_shape: float = 3.6
    small_scale: float = 1e-4
    dominant_shape: float = 1.0
    dominant_variance_ratio: float | None = 100.0
    dominant_reference: str = "aggregate"
    epsilon: float = 0.1
    propagation: str = "full"
    seed: int = 0


def build_subnet(net: Network, spec: SubnetSpec):
    """Grow a random radial subnetwork below ``spec.attach_bus`` (external id).

    Returns the extended network and, per small load, its internal bus
    index and relative size.
    """
    rng = stream(spec.seed, 0xA66, 0, 0)
    n0 = net.n
    host = net.index(spec.attach_bus)
    buses = list(net.buses)
    branches = list(net.branches)
    first_id = max(net.bus_ids) + 1
    ids = list(net.bus_ids)
    for k in range(spec.n_buses):
        parent = host if k == 0 else n0 + int(rng.integers(0, k))
        r = rng.uniform(*spec.r_range)
        x = rng.uniform(*spec.x_range)
        buses.append(Bus(n0 + k, "PQ"))
        branches.append(Branch(parent, n0 + k, r, x))
        ids.append(first_id + k)
    load_bus = n0 + rng.integers(0, spec.n_buses, size=spec.n_loads)
    size = 1.0 + spec.size_spread * rng.uniform(-1.0, 1.0, size=spec.n_loads)
    p_add = np.bincount(load_bus - n0, weights=size * spec.load_p, minlength=spec.n_buses)
    for k in range(spec.n_buses):
        b = buses[n0 + k]
        buses[n0 + k] = replace(b, p_load=float(p_add[k]), q_load=float(p_add[k] * spec.q_ratio))
    ext = net.replace(
        buses=tuple(buses),
        branches=tuple(branches),
        bus_ids=tuple(ids),
        name=f"{net.name}+subnet{spec.n_buses}",
    )
    return ext, load_bus, size


@dataclass
class AggregationResult:
    uniform: StatsReport
    dominant: StatsReport | None
    lindeberg_uniform: object
    lindeberg_dominant: object
    weights: np.ndarray = field(repr=False)
    dominant_weight: float = 0.0
    dominant_bus: int = -1
    seconds: float = 0.0
    d_omega_uniform: np.ndarray = field(default=None, repr=False)
    d_omega_dominant: np.ndarray = field(default=None, repr=False)


def _small_model(spec, bus, size):
    return NoiseModel(bus, "p", "ou_weibull_mapped", spec.lam, 1.0, shape=spec.small_shape, scale=spec.small_scale * size)


def aggregation_experiment(net: Network, spec: SubnetSpec = SubnetSpec()) -> AggregationResult:
    """Run the uniform and dominant-load cases and report on the CoI increments.

    Per-source tail moments for the Lindeberg ratio are computed by direct
    summation over each source's own sample, regenerating the sample from
    its stream in a second pass instead of holding all of them in memory.
    """
    t0 = time.perf_counter()
    ext, load_bus, size = build_subnet(net, spec)
    pmap = propagation_map(ext, spec.propagation)
    w = pmap.w_p[load_bus]
    n = spec.n_samples

    def small_increments(i):
        model = _small_model(spec, int(load_bus[i]), size[i])
        _, dx = noise_path(model, spec.dt, n, stream(spec.seed, 1, i, 0))
        return dx

    d_uniform = np.zeros(n)
    var_small = np.empty(spec.n_loads)
    for i in range(spec.n_loads):
        dx = small_increments(i)
        d_uniform += w[i] * dx
        var_small[i] = dx.var()

    dom = None
    if spec.dominant_variance_ratio is not None:
        small_level_var = sum(_small_model(spec, 0, s).level_variance() for s in size)
        ref = small_level_var if spec.dominant_reference == "aggregate" else small_level_var / spec.n_loads
        probe = NoiseModel(0, "p", "ou_weibull_mapped", spec.lam, 1.0, shape=spec.dominant_shape, scale=1.0)
        scale = np.sqrt(spec.dominant_variance_ratio * ref / probe.level_variance())
        rng = stream(spec.seed, 2, 0, 0)
        dom_bus = int(ext.n - spec.n_buses + rng.integers(0, spec.n_buses))
        dom_model = replace(probe, bus=dom_bus, scale=scale)
        _, dom_dx = noise_path(dom_model, spec.dt, n, stream(spec.seed, 3, 0, 0))
        dom = (dom_bus, float(pmap.w_p[dom_bus]), dom_dx)

    total_u = float(np.sum(w**2 * var_small))
    t_u = spec.epsilon * np.sqrt(total_u)
    tail_u = np.empty(spec.n_loads)
    if dom is not None:
        dom_var = float(dom[2].var())
        total_d = total_u + dom[1] ** 2 * dom_var
        t_d = spec.epsilon * np.sqrt(total_d)
        tail_d = np.empty(spec.n_loads + 1)
    for i in range(spec.n_loads):
        dx = small_increments(i)
        xi = w[i] * (dx - dx.mean())
        xi2 = xi * xi
        tail_u[i] = np.mean(np.where(np.abs(xi) > t_u, xi2, 0.0))
        if dom is not None:
            tail_d[i] = np.mean(np.where(np.abs(xi) > t_d, xi2, 0.0))

    lind_u = _lindeberg_result(tail_u, total_u, spec.epsilon, LINDEBERG_THRESHOLD)
    rep_u = normality_report(d_uniform)
    res = AggregationResult(rep_u, None, lind_u, None, w, d_omega_uniform=d_uniform)
    if dom is not None:
        bus, wd, dx = dom
        xi = wd * (dx - dx.mean())
        tail_d[-1] = np.mean(np.where(np.abs(xi) > t_d, xi * xi, 0.0))
        d_dom = d_uniform + wd * dx
        res.dominant = normality_report(d_dom)
        res.lindeberg_dominant = _lindeberg_result(tail_d, total_d, spec.epsilon, LINDEBERG_THRESHOLD)
        res.dominant_weight = wd
        res.dominant_bus = bus
        res.d_omega_dominant = d_dom
    res.seconds = time.perf_counter() - t0
    log.info("aggregation experiment finished in %.1f s", res.seconds)
    return res
