"""Truncated bosonic Fock space over a finite graph.

States are occupation vectors with total particle number at most ``n_max``,
ordered by total particle number (grade) and lexicographically within a
grade, so each grade is a contiguous slice of the basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import poisson

from . import kernels
from .lattice import Graph, build_laplacian

HERMITIAN_TOL = 1e-10


class CutoffError(ValueError):
    """The particle-number cutoff is too small for the requested accuracy."""


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    beta: float
    kappa: float
    lam: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.kappa < 0:
            raise ValueError(
                f"kappa must be < 0 (the Gibbs operator is trace class only for negative "
                f"chemical potential), got {self.kappa}"
            )
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


class FockBasis:
    """Occupation-number basis truncated at total particle number ``n_max``."""

    def __init__(self, graph: Graph, n_max: int):
        if int(n_max) != n_max or n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {n_max!r}")
        self.graph = graph
        self.n_max = int(n_max)
        self.n_sites = graph.vertex_count
        counts = [kernels.grade_count(self.n_sites, n) for n in range(self.n_max + 1)]
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._grades: dict[int, np.ndarray] = {}

    @property
    def dimension(self) -> int:
        return int(self.offsets[-1])

    def __len__(self):
        return self.dimension

    def __eq__(self, other):
        return (
            isinstance(other, FockBasis)
            and other.graph == self.graph
            and other.n_max == self.n_max
        )

    def __hash__(self):
        return hash((self.graph, self.n_max))

    def __repr__(self):
        return f"FockBasis(|V|={self.n_sites}, n_max={self.n_max}, dim={self.dimension})"

    def grade_states(self, n: int) -> np.ndarray:
        if n not in self._grades:
            self._grades[n] = kernels.grade_states(self.n_sites, n)
        return self._grades[n]

    def grade_slice(self, n: int) -> slice:
        return slice(int(self.offsets[n]), int(self.offsets[n + 1]))

    @cached_property
    def states(self) -> np.ndarray:
        return np.concatenate([self.grade_states(n) for n in range(self.n_max + 1)])

    @cached_property
    def grades(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def index(self, occupation) -> int:
        occ = np.asarray(occupation, dtype=np.int64).reshape(1, -1)
        if occ.shape[1] != self.n_sites or np.any(occ < 0):
            raise ValueError(f"invalid occupation vector {occupation!r}")
        n = int(occ.sum())
        if n > self.n_max:
            raise IndexError(f"occupation {occupation!r} above cutoff {self.n_max}")
        return int(self.offsets[n] + kernels.rank_states(occ, n)[0])

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dimension, dtype=complex)
        v[0] = 1.0
        return v


@dataclass
class FockOperator:
    basis: FockBasis
    matrix: np.ndarray
    hermitian_flag: bool = False
    # norm of what the cutoff discarded (ladder leakage, unitarity defect, ...)
    truncation_defect: float = 0.0

    def __post_init__(self):
        d = self.basis.dimension
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match basis dimension {d}")
        if self.hermitian_flag:
            dev = np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0)
            scale = max(1.0, np.max(np.abs(self.matrix), initial=0.0))
            if dev > HERMITIAN_TOL * scale:
                raise ValueError(f"operator flagged Hermitian but |M - M^dagger|_max = {dev:.3e}")

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        _check_same_basis(self, other)
        return FockOperator(self.basis, self.matrix @ other.matrix)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        _check_same_basis(self, other)
        return FockOperator(
            self.basis, self.matrix + other.matrix, self.hermitian_flag and other.hermitian_flag
        )

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        _check_same_basis(self, other)
        return FockOperator(
            self.basis, self.matrix - other.matrix, self.hermitian_flag and other.hermitian_flag
        )

    def scale(self, c) -> "FockOperator":
        herm = self.hermitian_flag and np.isreal(c)
        return FockOperator(self.basis, c * self.matrix, bool(herm), self.truncation_defect)

    def adjoint(self) -> "FockOperator":
        return FockOperator(self.basis, self.matrix.conj().T, self.hermitian_flag)

    def grade_block(self, n: int, m: int | None = None) -> np.ndarray:
        m = n if m is None else m
        return self.matrix[self.basis.grade_slice(n), self.basis.grade_slice(m)]


def _check_same_basis(a: FockOperator, b: FockOperator) -> None:
    if a.basis != b.basis:
        raise ValueError(f"basis mismatch: {a.basis!r} vs {b.basis!r}")


def _check_vertex(basis: FockBasis, x: int) -> int:
    if not 0 <= int(x) < basis.n_sites:
        raise IndexError(f"vertex {x} outside 0..{basis.n_sites - 1}")
    return int(x)


def _check_vector(basis: FockBasis, f) -> np.ndarray:
    f = np.asarray(f, dtype=complex).reshape(-1)
    if f.shape != (basis.n_sites,):
        raise ValueError(f"vector of length {f.shape[0]} on a graph with {basis.n_sites} vertices")
    if not np.all(np.isfinite(f)):
        raise ValueError("vector has non-finite entries")
    return f


def ladder_matrix(basis: FockBasis, x: int, kind: str) -> FockOperator:
    """Matrix of ``a_x`` (``kind='annihilation'``) or ``a*_x`` (``'creation'``).

    Creation images above the cutoff are dropped; the discarded norm
    ``sqrt(n_max + 1)`` is reported as ``truncation_defect``.
    """
    x = _check_vertex(basis, x)
    if kind not in ("creation", "annihilation"):
        raise ValueError(f"kind must be 'creation' or 'annihilation', got {kind!r}")
    mat = np.zeros((basis.dimension, basis.dimension))
    for n in range(1, basis.n_max + 1):
        rows, cols, vals = kernels.lowering_map(basis.grade_states(n), n, x)
        mat[basis.offsets[n - 1] + rows, basis.offsets[n] + cols] = vals
    if kind == "annihilation":
        return FockOperator(basis, mat.astype(complex))
    return FockOperator(basis, mat.T.astype(complex), truncation_defect=math.sqrt(basis.n_max + 1))


def number_operator(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, np.diag(basis.grades.astype(complex)), True)


def second_quantize(basis: FockBasis, B) -> FockOperator:
    """``dΓ(B) = sum_{xy} a*_x B_xy a_y``, assembled grade by grade."""
    B = np.asarray(B)
    if B.shape != (basis.n_sites, basis.n_sites):
        raise ValueError(f"one-body matrix shape {B.shape} does not match {basis.n_sites} vertices")
    mat = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    for n in range(basis.n_max + 1):
        sl = basis.grade_slice(n)
        mat[sl, sl] = kernels.second_quantize_block(basis.grade_states(n), n, B)
    herm = bool(np.allclose(B, B.conj().T, atol=1e-14, rtol=0))
    return FockOperator(basis, mat, herm)


def one_body_operator(graph: Graph, kappa: float) -> np.ndarray:
    """``-Δ - κ Id`` on ``ℂ^V``."""
    return -build_laplacian(graph) - kappa * np.eye(graph.vertex_count)


def interaction_diagonal(states: np.ndarray) -> np.ndarray:
    """Diagonal of ``sum_x a*_x a*_x a_x a_x`` on the given states."""
    return np.sum(states * (states - 1), axis=1).astype(np.float64)


def hamiltonian_block(graph: Graph, p: ModelParams, n: int, states: np.ndarray | None = None) -> np.ndarray:
    """Grade-``n`` block of the Bose-Hubbard Hamiltonian (real symmetric)."""
    if states is None:
        states = kernels.grade_states(graph.vertex_count, n)
    block = p.epsilon * kernels.second_quantize_block(states, n, one_body_operator(graph, p.kappa))
    block = np.real(block)
    block[np.diag_indices_from(block)] += p.epsilon**2 * p.lam / 2 * interaction_diagonal(states)
    return block


def build_hamiltonian(basis: FockBasis, p: ModelParams, form: str = "dgamma") -> FockOperator:
    """Bose-Hubbard Hamiltonian ``H_ε`` on the truncated space.

    ``form='dgamma'`` uses ``ε dΓ(-Δ - κ) + ε² λ/2 Σ a*a*aa`` grade by grade;
    ``form='edges'`` multiplies ladder matrices following the edge-sum form
    ``ε/2 Σ_{x~y} (a*_x - a*_y)(a_x - a_y) - εκ N + ε² λ/2 Σ a*a*aa``.
    Both are exact on the truncated space since no term raises the grade.
    """
    g = basis.graph
    if form == "dgamma":
        mat = np.zeros((basis.dimension, basis.dimension), dtype=complex)
        for n in range(basis.n_max + 1):
            sl = basis.grade_slice(n)
            mat[sl, sl] = hamiltonian_block(g, p, n, basis.grade_states(n))
        return FockOperator(basis, mat, True)
    if form != "edges":
        raise ValueError(f"unknown Hamiltonian form {form!r}")
    ann = [ladder_matrix(basis, x, "annihilation").matrix for x in range(g.vertex_count)]
    cre = [a.conj().T for a in ann]
    mat = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    # the sum over ordered neighbour pairs counts every edge twice
    for x, y in g.edges:
        mat += 2 * (p.epsilon / 2) * ((cre[x] - cre[y]) @ (ann[x] - ann[y]))
    for x in range(g.vertex_count):
        mat += -p.epsilon * p.kappa * (cre[x] @ ann[x])
        mat += p.epsilon**2 * p.lam / 2 * (cre[x] @ cre[x] @ ann[x] @ ann[x])
    return FockOperator(basis, mat, True)


def field_operator(basis: FockBasis, f) -> FockOperator:
    """``Φ(f) = (a(f) + a*(f))/√2`` with ``a(f) = Σ conj(f_x) a_x``."""
    f = _check_vector(basis, f)
    mat = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    for x in range(basis.n_sites):
        if f[x] != 0:
            ax = ladder_matrix(basis, x, "annihilation").matrix
            mat += np.conj(f[x]) * ax + f[x] * ax.conj().T
    return FockOperator(basis, mat / math.sqrt(2), True)


def weyl_operator(basis: FockBasis, f, epsilon: float) -> FockOperator:
    """``exp(i √ε Φ(f))`` through the eigendecomposition of the truncated ``Φ(f)``.

    Unitary on the truncated space; ``truncation_defect`` holds
    ``|W - P W_exact P|_max`` estimated against the exact projection.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    phi = field_operator(basis, f).matrix
    try:
        vals, vecs = np.linalg.eigh(phi)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigendecomposition of the field operator failed: {exc}") from exc
    mat = (vecs * np.exp(1j * math.sqrt(epsilon) * vals)) @ vecs.conj().T
    exact = weyl_projected(basis, f, epsilon).matrix
    return FockOperator(basis, mat, truncation_defect=float(np.max(np.abs(mat - exact))))


def displacement_factors(f, epsilon: float, n_max: int) -> list[np.ndarray]:
    """Single-site matrices of ``W_ε(f)``; ``W_ε(f) = ⊗_x D(i √(ε/2) f_x)``."""
    f = np.asarray(f, dtype=complex).reshape(-1)
    return [kernels.displacement_matrix(1j * math.sqrt(epsilon / 2) * fx, n_max) for fx in f]


def weyl_projected(basis: FockBasis, f, epsilon: float) -> FockOperator:
    """Exact compression ``P W_ε(f) P`` of the Weyl operator to the truncated space."""
    f = _check_vector(basis, f)
    factors = displacement_factors(f, epsilon, basis.n_max)
    st = basis.states
    mat = np.ones((basis.dimension, basis.dimension), dtype=complex)
    for x, d in enumerate(factors):
        mat *= d[st[:, x][:, None], st[:, x][None, :]]
    W = FockOperator(basis, mat)
    W.truncation_defect = float(np.max(np.abs(mat.conj().T @ mat - np.eye(basis.dimension))))
    return W


@dataclass
class FockVector:
    basis: FockBasis
    amplitudes: np.ndarray
    tail_mass: float = 0.0


def coherent_state(basis: FockBasis, u, epsilon: float, max_tail: float = 1e-10) -> FockVector:
    """``e^{-|u|²/2ε} Σ_k (a*(u)/√ε)^k Ω / k!`` truncated at ``n_max``.

    The particle number is Poisson with mean ``|u|²/ε``; the mass beyond the
    cutoff is returned as ``tail_mass`` and must not exceed ``max_tail``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    u = _check_vector(basis, u)
    z = u / math.sqrt(epsilon)
    st = basis.states
    log_fact = np.sum([[math.lgamma(k + 1) for k in row] for row in st], axis=1) if len(st) else np.zeros(0)
    amp = np.ones(basis.dimension, dtype=complex)
    for x in range(basis.n_sites):
        amp *= z[x] ** st[:, x]
    amp *= np.exp(-0.5 * log_fact - 0.5 * float(np.vdot(z, z).real))
    tail = float(poisson.sf(basis.n_max, float(np.vdot(z, z).real)))
    if tail > max_tail:
        raise CutoffError(
            f"coherent state tail mass {tail:.3e} above {max_tail:.1e}: "
            f"mean occupation {np.vdot(z, z).real:.3g} needs n_max > {basis.n_max}"
        )
    return FockVector(basis, amp, tail)
