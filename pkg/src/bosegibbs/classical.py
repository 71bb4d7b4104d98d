"""Classical field energy and integrals against ``e^{-βh(u)} du`` on ``ℂ^V``.

``du`` is Lebesgue measure ``d(Re u_x) d(Im u_x)`` at every vertex. Two
integration routes are provided:

* importance sampling from the complex Gaussian ``∝ e^{-β(-κ)‖u‖²}``, whose
  normalization ``(π/(β(-κ)))^{|V|}`` is known, reweighted by
  ``e^{-β(<u,-Δu> + (λ/2)Σ|u_x|⁴)} ∈ (0, 1]``;
* tensorized polar quadrature for ``|V| ≤ 2``.

Integrands take ``u`` of shape ``(n, |V|)`` and return ``(n,)`` or
``(n, k)`` for ``k`` simultaneous integrals.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import roots_laguerre

from .lattice import Graph

WORKERS_ENV = "BOSEGIBBS_WORKERS"


def _field(u, g: Graph) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape[-1] != g.vertex_count:
        raise ValueError(f"u has {u.shape[-1]} entries but the graph has {g.vertex_count} vertices")
    return u


def _minus_laplacian_apply(u: np.ndarray, g: Graph) -> np.ndarray:
    # (-Δu)(x) = deg(x) u(x) - Σ_{y~x} u(y), for any leading batch shape
    out = u * g.degrees
    for x, y in g.edges:
        out[..., x] -= u[..., y]
        out[..., y] -= u[..., x]
    return out


def dnls_energy(u, g: Graph, kappa: float, lam: float):
    """``h(u) = <u, -Δu> - κ‖u‖² + (λ/2) Σ_x |u_x|⁴``."""
    u = _field(u, g)
    a2 = np.abs(u) ** 2
    kinetic = np.sum(np.conj(u) * _minus_laplacian_apply(u, g), axis=-1).real
    return kinetic - kappa * np.sum(a2, axis=-1) + lam / 2 * np.sum(a2 * a2, axis=-1)


def hartree(u, g: Graph, kappa: float, lam: float) -> np.ndarray:
    """``h^H(u) = -Δu - κu + λ|u|²u``, the Wirtinger gradient ``∂h/∂ū``."""
    u = _field(u, g)
    return _minus_laplacian_apply(u, g) - kappa * u + lam * np.abs(u) ** 2 * u


def importance_weight(u, g: Graph, beta: float, lam: float) -> np.ndarray:
    """``e^{-β(<u,-Δu> + (λ/2)Σ|u_x|⁴)}``: the Gibbs factor over the Gaussian part."""
    u = _field(u, g)
    a2 = np.abs(u) ** 2
    kinetic = np.sum(np.conj(u) * _minus_laplacian_apply(u, g), axis=-1).real
    # -Δ is positive semidefinite, so only rounding can push this below zero
    return np.exp(-beta * (np.maximum(kinetic, 0.0) + lam / 2 * np.sum(a2 * a2, axis=-1)))


@dataclass(frozen=True)
class ClassicalField:
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(u)):
            raise ValueError("classical field has non-finite entries")
        object.__setattr__(self, "u", u)

    def energy(self, g: Graph, kappa: float, lam: float) -> float:
        return float(dnls_energy(self.u, g, kappa, lam))

    def hartree(self, g: Graph, kappa: float, lam: float) -> "ClassicalField":
        return ClassicalField(hartree(self.u, g, kappa, lam))


@dataclass
class Budget:
    """Integration budget.

    Importance sampling draws up to ``samples`` points in blocks of
    ``block_size`` and stops early once the relative standard error of every
    output is below ``target_rel_error`` (if set). Quadrature uses ``radial`` ×
    ``angular`` nodes per site and the doubled grid for the error estimate.
    """

    samples: int = 1_000_000
    target_rel_error: float | None = None
    block_size: int = 1 << 16
    radial: int = 128
    angular: int = 64

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def default_budget(method: str, n_sites: int) -> Budget:
    if method == "quadrature" and n_sites == 2:
        # the doubled tensor grid has (4·radial·angular)² nodes
        return Budget(radial=24, angular=16)
    return Budget()


@dataclass
class IntegralEstimate:
    value: complex
    method: str
    std_error: float | None = None
    quadrature_error: float | None = None
    n_samples: int | None = None
    n_nodes: int | None = None
    seed: int | None = None
    target_met: bool = True
    min_weight: float | None = None
    max_weight: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return float(self.std_error if self.method == "importance" else self.quadrature_error)

    def to_dict(self) -> dict:
        d = {
            "value": [float(np.real(self.value)), float(np.imag(self.value))],
            "method": self.method,
            "error": self.error,
        }
        for k in ("std_error", "quadrature_error", "n_samples", "n_nodes", "seed", "target_met", "min_weight", "max_weight"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from exc
    return max(1, n)


def _as_columns(vals: np.ndarray, n: int) -> np.ndarray:
    vals = np.asarray(vals, dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != n:
        raise ValueError(f"integrand returned {vals.shape[0]} rows for {n} points")
    return vals


def _column_sums(m: np.ndarray) -> np.ndarray:
    # numpy sums pairwise only along a contiguous axis; a strided axis=0
    # reduction accumulates sequentially and loses digits for long columns
    return np.ascontiguousarray(m.T).sum(axis=1)


def _sample_block(seed_seq: np.random.SeedSequence, n: int, V: int, sigma: float) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    z = rng.standard_normal((n, V, 2))
    return sigma * (z[..., 0] + 1j * z[..., 1])


def _importance(G_fn, g, beta, kappa, lam, budget: Budget, seed: int):
    V = g.vertex_count
    c = beta * -kappa
    sigma = math.sqrt(1 / (2 * c))  # each of Re, Im
    norm = (math.pi / c) ** V
    n_blocks = max(1, math.ceil(budget.samples / budget.block_size))
    # one child stream per block: results do not depend on worker count
    children = np.random.SeedSequence(int(seed)).spawn(n_blocks)
    sizes = [min(budget.block_size, budget.samples - i * budget.block_size) for i in range(n_blocks)]

    def run(i):
        u = _sample_block(children[i], sizes[i], V, sigma)
        w = importance_weight(u, g, beta, lam)
        vals = _as_columns(G_fn(u), sizes[i]) * w[:, None]
        return (
            _column_sums(vals),
            _column_sums(vals.real**2) + _column_sums(vals.imag**2),
            float(w.min()),
            float(w.max()),
        )

    total = None
    sq = None
    count = 0
    wmin, wmax = math.inf, -math.inf
    target_met = budget.target_rel_error is None
    workers = _workers()
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        done = False
        for start in range(0, n_blocks, workers):
            idx = range(start, min(start + workers, n_blocks))
            parts = list(pool.map(run, idx)) if pool else [run(i) for i in idx]
            for i, (s, s2, lo, hi) in zip(idx, parts):
                # fixed reduction order, block by block, so the stopping point
                # does not depend on the worker count
                total = s if total is None else total + s
                sq = s2 if sq is None else sq + s2
                count += sizes[i]
                wmin, wmax = min(wmin, lo), max(wmax, hi)
                if budget.target_rel_error is not None and count > 1:
                    mean = total / count
                    var = np.maximum(sq / count - np.abs(mean) ** 2, 0.0)
                    rel = np.sqrt(var / count) / np.maximum(np.abs(mean), 1e-300)
                    if np.all(rel <= budget.target_rel_error):
                        target_met = done = True
                        break
            if done:
                break
    finally:
        if pool:
            pool.shutdown()
    mean = total / count
    var = np.maximum(sq / count - np.abs(mean) ** 2, 0.0) * count / max(count - 1, 1)
    se = np.sqrt(var / count)
    return [
        IntegralEstimate(
            value=complex(norm * mean[k]),
            method="importance",
            std_error=float(norm * se[k]),
            n_samples=count,
            seed=int(seed),
            target_met=target_met,
            min_weight=wmin,
            max_weight=wmax,
        )
        for k in range(mean.shape[0])
    ]


def polar_nodes(n_sites: int, beta: float, kappa: float, radial: int, angular: int):
    """Tensor grid on ``ℂ^{n_sites}`` for ``∫ F(u) e^{-β(-κ)‖u‖²} du``.

    Per site ``u = √s e^{iθ}`` with ``du = ds dθ / 2``; Gauss–Laguerre in
    ``t = β(-κ)s`` and the trapezoid rule in ``θ``, which is spectrally
    accurate for periodic integrands.
    """
    c = beta * -kappa
    t, wt = roots_laguerre(radial)
    theta = 2 * np.pi * np.arange(angular) / angular
    r = np.sqrt(t / c)
    site_u = (r[:, None] * np.exp(1j * theta)[None, :]).reshape(-1)
    site_w = np.repeat(wt / (2 * c), angular) * (2 * np.pi / angular)
    if n_sites == 1:
        return site_u[:, None], site_w
    grids = np.meshgrid(*([np.arange(site_u.size)] * n_sites), indexing="ij")
    idx = [gr.reshape(-1) for gr in grids]
    u = np.stack([site_u[i] for i in idx], axis=-1)
    w = np.prod(np.stack([site_w[i] for i in idx], axis=-1), axis=-1)
    return u, w


def _quadrature_once(G_fn, g, beta, kappa, lam, radial, angular, chunk):
    u_all, w_all = polar_nodes(g.vertex_count, beta, kappa, radial, angular)
    total = None
    for s in range(0, u_all.shape[0], chunk):
        u = u_all[s : s + chunk]
        w = w_all[s : s + chunk] * importance_weight(u, g, beta, lam)
        part = _column_sums(_as_columns(G_fn(u), u.shape[0]) * w[:, None])
        total = part if total is None else total + part
    return total, u_all.shape[0]


def _quadrature(G_fn, g, beta, kappa, lam, budget: Budget):
    if g.vertex_count > 2:
        raise ValueError(f"quadrature supports |V| <= 2, got |V| = {g.vertex_count}")
    chunk = budget.block_size
    coarse, _ = _quadrature_once(G_fn, g, beta, kappa, lam, budget.radial, budget.angular, chunk)
    fine, nodes = _quadrature_once(G_fn, g, beta, kappa, lam, 2 * budget.radial, 2 * budget.angular, chunk)
    err = np.abs(fine - coarse)
    # a converged rule leaves only rounding in the difference
    floor = 64 * np.finfo(float).eps * np.maximum(np.abs(fine), 1.0)
    return [
        IntegralEstimate(
            value=complex(fine[k]),
            method="quadrature",
            quadrature_error=float(max(err[k], floor[k])),
            n_nodes=nodes,
        )
        for k in range(fine.shape[0])
    ]


def gibbs_integrals(
    G_fn: Callable,
    g: Graph,
    beta: float,
    kappa: float,
    lam: float,
    method: str = "importance",
    budget: Budget | None = None,
    seed: int = 0,
) -> list[IntegralEstimate]:
    """``∫ G_k(u) e^{-βh(u)} du`` for every output column ``k`` of ``G_fn``."""
    if not kappa < 0:
        raise ValueError(f"kappa must be < 0 for the Gibbs factor to be integrable, got {kappa}")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    budget = budget or default_budget(method, g.vertex_count)
    if method == "importance":
        return _importance(G_fn, g, beta, kappa, lam, budget, seed)
    if method == "quadrature":
        return _quadrature(G_fn, g, beta, kappa, lam, budget)
    raise ValueError(f"method must be 'importance' or 'quadrature', got {method!r}")


def gibbs_integral(G_fn, g, beta, kappa, lam, method="importance", budget=None, seed=0) -> IntegralEstimate:
    """Single-output form of :func:`gibbs_integrals`."""
    res = gibbs_integrals(G_fn, g, beta, kappa, lam, method, budget, seed)
    if len(res) != 1:
        raise ValueError(f"integrand returned {len(res)} columns; use gibbs_integrals")
    return res[0]


def weyl_phase(u, f) -> np.ndarray:
    """``e^{√2 i Re<f, u>}``."""
    return np.exp(1j * math.sqrt(2) * np.sum(np.conj(f) * u, axis=-1).real)


def coefficient_integrals(
    j2_list,
    f,
    g: Graph,
    beta: float,
    kappa: float,
    lam: float,
    method: str = "importance",
    budget: Budget | None = None,
    seed: int = 0,
) -> dict[int, IntegralEstimate]:
    """``I_{j2/2}(f) = ∫ e^{√2 i Re<f,u>} C_{j2/2}(u, f) e^{-βh(u)} du`` on shared nodes.

    Odd ``j2`` give identically vanishing coefficients and return exact zeros.
    """
    from .wick import coefficient_series

    f = np.asarray(f, dtype=complex).reshape(-1)
    j2_list = [int(j) for j in j2_list]
    even = sorted({j for j in j2_list if j % 2 == 0})
    out: dict[int, IntegralEstimate] = {}
    if even:
        top = max(even)

        def G(u):
            series = coefficient_series(top, u, f, g, beta, kappa, lam)
            phase = weyl_phase(u, f)
            return np.stack([phase * series[j] for j in even], axis=-1)

        res = gibbs_integrals(G, g, beta, kappa, lam, method, budget, seed)
        out.update(zip(even, res))
    for j in j2_list:
        if j % 2:
            out[j] = IntegralEstimate(0j, method, std_error=0.0, quadrature_error=0.0, seed=seed if method == "importance" else None)
    return {j: out[j] for j in j2_list}


def coefficient_integral(j2, f, g, beta, kappa, lam, method="importance", budget=None, seed=0) -> IntegralEstimate:
    return coefficient_integrals([j2], f, g, beta, kappa, lam, method, budget, seed)[int(j2)]


def rdm_integrand(x: int, y: int, g: Graph, beta: float, kappa: float, lam: float, orders=(0, 1)):
    """Integrand columns for the first orders of ``(επ)^{|V|}Tr(e^{-βH_ε} εa*_x a_y)``.

    Order 0 is ``conj(u_x) u_y``; order 1 is
    ``(β²/2) conj(u_x) u_y ‖h^H(u)‖² - β u_y conj(h^H(u)_x)``.
    """
    for v in (x, y):
        if not 0 <= int(v) < g.vertex_count:
            raise IndexError(f"vertex {v} outside 0..{g.vertex_count - 1}")
    for o in orders:
        if o not in (0, 1):
            raise ValueError(f"order must be 0 or 1, got {o}")

    def G(u):
        base = np.conj(u[:, x]) * u[:, y]
        cols = []
        for o in orders:
            if o == 0:
                cols.append(base)
            else:
                h = hartree(u, g, kappa, lam)
                cols.append(beta**2 / 2 * base * np.sum(np.abs(h) ** 2, axis=-1) - beta * u[:, y] * np.conj(h[:, x]))
        return np.stack(cols, axis=-1)

    return G


def rdm_classical(x, y, order, g, beta, kappa, lam, method="importance", budget=None, seed=0) -> IntegralEstimate:
    """Order-0 or order-1 classical term of the reduced density matrix entry ``(x, y)``."""
    G = rdm_integrand(x, y, g, beta, kappa, lam, orders=(order,))
    return gibbs_integral(G, g, beta, kappa, lam, method, budget, seed)
