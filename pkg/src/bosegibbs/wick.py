"""Normal-ordered polynomials in creation and annihilation operators.

A monomial ``c · a*^{n} a^{m}`` is keyed by the pair of occupation-count
tuples ``(n, m)``; ``n[x]`` creators and ``m[x]`` annihilators sit on vertex
``x``. Coefficients are complex scalars or, for evaluation at many classical
fields at once, equally shaped numpy arrays. Only exact zeros are pruned.

Products are normal ordered site by site with

    a^p a*^q = sum_k C(p, k) C(q, k) k! a*^(q-k) a^(p-k).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .classical import hartree
from .lattice import Graph, build_laplacian

Key = tuple[tuple[int, ...], tuple[int, ...]]


def _is_zero(c) -> bool:
    return not np.any(c)


@lru_cache(maxsize=None)
def _site_contractions(p: int, q: int) -> tuple[tuple[int, float], ...]:
    return tuple((k, math.comb(p, k) * math.comb(q, k) * math.factorial(k)) for k in range(min(p, q) + 1))


@lru_cache(maxsize=None)
def _contractions(ann: tuple[int, ...], cre: tuple[int, ...]) -> tuple[tuple[tuple[int, ...], float], ...]:
    """Ways of moving ``a^ann`` past ``a*^cre``: pairs (contracted counts, weight)."""
    per_site = [_site_contractions(p, q) for p, q in zip(ann, cre)]
    out = []
    for combo in itertools.product(*per_site):
        out.append((tuple(k for k, _ in combo), math.prod(w for _, w in combo)))
    return tuple(out)


@lru_cache(maxsize=None)
def _full_contraction(ann: tuple[int, ...], cre: tuple[int, ...]) -> float:
    # weight of the term with every annihilator contracted, 0 if impossible
    if any(p > q for p, q in zip(ann, cre)):
        return 0.0
    return float(math.prod(math.perm(q, p) for p, q in zip(ann, cre)))


@lru_cache(maxsize=None)
def _factorial_weight(occ: tuple[int, ...]) -> float:
    return float(math.prod(math.factorial(n) for n in occ))


@dataclass(frozen=True)
class WickMonomial:
    """``coefficient · a*_{creators} a_{annihilators}`` with sorted vertex lists."""

    creators: tuple[int, ...]
    annihilators: tuple[int, ...]
    coefficient: complex


def _counts_to_vertices(counts: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(x for x, c in enumerate(counts) for _ in range(c))


class WickPolynomial:
    """Normal-ordered polynomial on ``n_sites`` bosonic modes."""

    __slots__ = ("n_sites", "terms")

    def __init__(self, n_sites: int, terms: dict[Key, object] | None = None):
        self.n_sites = int(n_sites)
        self.terms: dict[Key, object] = {}
        for key, c in (terms or {}).items():
            if len(key[0]) != self.n_sites or len(key[1]) != self.n_sites:
                raise ValueError(f"monomial key {key!r} does not match {self.n_sites} sites")
            if not _is_zero(c):
                self.terms[key] = c

    # constructors
    @classmethod
    def zero(cls, n_sites: int) -> "WickPolynomial":
        return cls(n_sites)

    @classmethod
    def scalar(cls, n_sites: int, c=1.0) -> "WickPolynomial":
        z = (0,) * n_sites
        return cls(n_sites, {(z, z): c})

    @classmethod
    def monomial(cls, n_sites: int, creators=(), annihilators=(), c=1.0) -> "WickPolynomial":
        """Normal-ordered monomial from vertex lists (repeats allowed)."""
        cre = [0] * n_sites
        ann = [0] * n_sites
        for x in creators:
            cre[x] += 1
        for x in annihilators:
            ann[x] += 1
        return cls(n_sites, {(tuple(cre), tuple(ann)): c})

    @classmethod
    def creator(cls, n_sites: int, x: int, c=1.0) -> "WickPolynomial":
        return cls.monomial(n_sites, (x,), (), c)

    @classmethod
    def annihilator(cls, n_sites: int, x: int, c=1.0) -> "WickPolynomial":
        return cls.monomial(n_sites, (), (x,), c)

    # inspection
    def __len__(self) -> int:
        return len(self.terms)

    def degree(self) -> int:
        return max((sum(c) + sum(a) for c, a in self.terms), default=0)

    def monomials(self) -> list[WickMonomial]:
        return [
            WickMonomial(_counts_to_vertices(c), _counts_to_vertices(a), coef)
            for (c, a), coef in sorted(self.terms.items())
        ]

    def is_vacuum_state(self) -> bool:
        """True when only creators occur, i.e. the polynomial is its own image of Ω."""
        return all(not any(a) for _, a in self.terms)

    def __repr__(self) -> str:
        return f"WickPolynomial(n_sites={self.n_sites}, terms={len(self.terms)}, degree={self.degree()})"

    # algebra
    def _check(self, other: "WickPolynomial") -> None:
        if other.n_sites != self.n_sites:
            raise ValueError(f"site count mismatch: {self.n_sites} vs {other.n_sites}")

    def __add__(self, other: "WickPolynomial") -> "WickPolynomial":
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        return WickPolynomial(self.n_sites, out)

    def __neg__(self) -> "WickPolynomial":
        return WickPolynomial(self.n_sites, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "WickPolynomial") -> "WickPolynomial":
        return self + (-other)

    def scale(self, c) -> "WickPolynomial":
        return WickPolynomial(self.n_sites, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, WickPolynomial):
            return normal_ordered_product(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def adjoint(self) -> "WickPolynomial":
        return WickPolynomial(self.n_sites, {(a, c): np.conj(v) for (c, a), v in self.terms.items()})

    def vacuum_expectation(self):
        z = (0,) * self.n_sites
        return self.terms.get((z, z), 0.0)

    def allclose(self, other: "WickPolynomial", rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        self._check(other)
        for k in set(self.terms) | set(other.terms):
            if not np.allclose(self.terms.get(k, 0.0), other.terms.get(k, 0.0), rtol=rtol, atol=atol):
                return False
        return True


def _accumulate(out: dict, key: Key, c) -> None:
    if key in out:
        out[key] = out[key] + c
    else:
        out[key] = c


def normal_ordered_product(P: WickPolynomial, Q: WickPolynomial) -> WickPolynomial:
    """``P·Q`` rewritten in normal order with ``[a_x, a*_y] = δ_xy``."""
    P._check(Q)
    out: dict[Key, object] = {}
    for (c1, a1), p in P.terms.items():
        for (c2, a2), q in Q.terms.items():
            pq = p * q
            for k, w in _contractions(a1, c2):
                cre = tuple(x + y - z for x, y, z in zip(c1, c2, k))
                ann = tuple(x - z + y for x, y, z in zip(a1, a2, k))
                _accumulate(out, (cre, ann), w * pq)
    return WickPolynomial(P.n_sites, out)


def apply_to_vacuum_state(P: WickPolynomial, state: WickPolynomial) -> WickPolynomial:
    """``P·S`` restricted to creator-only monomials, for creator-only ``S``.

    With ``S`` standing for the vector ``SΩ``, this is the vector ``PSΩ``: every
    surviving annihilator would hit Ω.
    """
    P._check(state)
    out: dict[Key, object] = {}
    for (c1, a1), p in P.terms.items():
        for (c2, a2), q in state.terms.items():
            if any(a2):
                raise ValueError("state polynomial must contain creators only")
            w = _full_contraction(a1, c2)
            if w == 0.0:
                continue
            cre = tuple(x + y - z for x, y, z in zip(c1, c2, a1))
            _accumulate(out, (cre, a2), w * (p * q))
    return WickPolynomial(P.n_sites, out)


def vacuum_state(n_sites: int) -> WickPolynomial:
    return WickPolynomial.scalar(n_sites, 1.0)


def vacuum_pairing(P: WickPolynomial, Q: WickPolynomial):
    """``<PΩ, QΩ>`` for creator-only polynomials: ``Σ conj(p_n) q_n n!``."""
    P._check(Q)
    total = 0.0
    for key, q in Q.terms.items():
        if any(key[1]):
            raise ValueError("vacuum_pairing expects creator-only polynomials")
        p = P.terms.get(key)
        if p is not None:
            total = total + np.conj(p) * q * _factorial_weight(key[0])
    return total


def adjoint(P: WickPolynomial) -> WickPolynomial:
    return P.adjoint()


def vacuum_expectation(P: WickPolynomial):
    """``<Ω, PΩ>`` of a normal-ordered polynomial: its constant term."""
    return P.vacuum_expectation()


# field operators and the interaction expansion


def _second_quantized(n_sites: int, B) -> WickPolynomial:
    out = {}
    z = [0] * n_sites
    for x in range(n_sites):
        for y in range(n_sites):
            if B[x][y] != 0:
                cre = list(z)
                ann = list(z)
                cre[x] += 1
                ann[y] += 1
                _accumulate(out, (tuple(cre), tuple(ann)), B[x][y])
    return WickPolynomial(n_sites, out)


def creation_of(f) -> WickPolynomial:
    """``a*(f) = Σ f_x a*_x``; ``f`` may carry a leading batch axis."""
    f = np.asarray(f, dtype=complex)
    V = f.shape[-1]
    return WickPolynomial(V, {_unit(V, x, 0): f[..., x] for x in range(V)})


def annihilation_of(f) -> WickPolynomial:
    """``a(f) = Σ conj(f_x) a_x``, conjugate-linear in ``f``."""
    f = np.asarray(f, dtype=complex)
    V = f.shape[-1]
    return WickPolynomial(V, {_unit(V, x, 1): np.conj(f[..., x]) for x in range(V)})


def _unit(V: int, x: int, side: int) -> Key:
    e = tuple(1 if i == x else 0 for i in range(V))
    z = (0,) * V
    return (e, z) if side == 0 else (z, e)


def field_polynomial(f) -> WickPolynomial:
    """``Φ(f) = (a(f) + a*(f))/√2``."""
    return (annihilation_of(f) + creation_of(f)).scale(1 / math.sqrt(2))


def field_power_state(f, k: int) -> WickPolynomial:
    """The vector ``Φ(f)^k Ω`` as a creator-only polynomial."""
    phi = field_polynomial(f)
    state = vacuum_state(phi.n_sites)
    for _ in range(k):
        state = apply_to_vacuum_state(phi, state)
    return state


@dataclass
class InteractionOperators:
    """``A₁..A₄`` at a fixed classical field, plus the memo of ``A_ℓ^{(m)}``.

    Unpacks as ``A1, A2, A3, A4 = ops``.
    """

    A1: WickPolynomial
    A2: WickPolynomial
    A3: WickPolynomial
    A4: WickPolynomial
    _memo: dict = field(default_factory=dict, repr=False)
    _vac: dict = field(default_factory=dict, repr=False)

    def __iter__(self):
        return iter((self.A1, self.A2, self.A3, self.A4))

    def __getitem__(self, k: int) -> WickPolynomial:
        """``A_k`` for ``k = 1..4``."""
        if k not in (1, 2, 3, 4):
            raise IndexError(f"A_k is defined for k in 1..4, got {k}")
        return (self.A1, self.A2, self.A3, self.A4)[k - 1]

    @property
    def n_sites(self) -> int:
        return self.A1.n_sites


def build_interaction_operators(u, g: Graph, kappa: float, lam: float) -> InteractionOperators:
    """Operators of ``W̃†H_εW̃ − h(u) = Σ_k ε^{k/2} A_k`` for the shift ``a ↦ a + u/√ε``.

    ``u`` has shape ``(|V|,)`` or ``(batch, |V|)``; in the latter case the
    coefficients are arrays over the batch.
    """
    u = np.asarray(u, dtype=complex)
    V = g.vertex_count
    if u.shape[-1] != V:
        raise ValueError(f"u has {u.shape[-1]} entries but the graph has {V} vertices")
    hH = hartree(u, g, kappa, lam)
    A1 = creation_of(hH) + annihilation_of(hH)

    B = -build_laplacian(g) - kappa * np.eye(V)
    A2 = _second_quantized(V, B)
    z = (0,) * V
    terms2: dict[Key, object] = {}
    terms3: dict[Key, object] = {}
    terms4: dict[Key, object] = {}
    for x in range(V):
        e1 = tuple(1 if i == x else 0 for i in range(V))
        e2 = tuple(2 if i == x else 0 for i in range(V))
        ux = u[..., x]
        terms2[(e2, z)] = lam / 2 * ux**2
        terms2[(e1, e1)] = 2 * lam * np.abs(ux) ** 2
        terms2[(z, e2)] = lam / 2 * np.conj(ux) ** 2
        # the cubic shift term carries λ, not λ/2: two of the four legs pick up u/√ε
        terms3[(e2, e1)] = lam * ux
        terms3[(e1, e2)] = lam * np.conj(ux)
        terms4[(e2, e2)] = lam / 2
    A2 = A2 + WickPolynomial(V, terms2)
    return InteractionOperators(A1, A2, WickPolynomial(V, terms3), WickPolynomial(V, terms4))


def ell_range(m: int) -> range:
    """Indices ``ℓ`` with possibly non-zero ``A_ℓ^{(m)}Ω``."""
    return range(m, 4 * m - 1)


def recursive_A(m: int, ell: int, ops: InteractionOperators) -> WickPolynomial:
    """``A_ℓ^{(m)} = Σ_k A_k A_{ℓ-k}^{(m-1)}``, memoized on ``(m, ℓ)``.

    ``A_k^{(1)} = A_k``. For ``m ≥ 2`` the polynomial is zero unless
    ``m ≤ ℓ ≤ 4m-2``; the dropped index range only contains products ending in
    ``A₃`` or ``A₄``, which annihilate the vacuum, so every ``A_ℓ^{(m)}Ω`` is
    unaffected.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    V = ops.n_sites
    if m == 1:
        return ops[ell] if 1 <= ell <= 4 else WickPolynomial.zero(V)
    if ell < m or ell > 4 * m - 2:
        return WickPolynomial.zero(V)
    key = (m, ell)
    if key not in ops._memo:
        total = WickPolynomial.zero(V)
        for k in (1, 2, 3, 4):
            rest = recursive_A(m - 1, ell - k, ops)
            if len(rest):
                total = total + normal_ordered_product(ops[k], rest)
        ops._memo[key] = total
    return ops._memo[key]


def recursive_A_vacuum(m: int, ell: int, ops: InteractionOperators) -> WickPolynomial:
    """The vector ``A_ℓ^{(m)}Ω`` through the same recursion applied to Ω."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    V = ops.n_sites
    if ell < m or ell > 4 * m - 2:
        return WickPolynomial.zero(V)
    key = (m, ell)
    if key not in ops._vac:
        if m == 1:
            val = apply_to_vacuum_state(ops[ell], vacuum_state(V))
        else:
            val = WickPolynomial.zero(V)
            for k in (1, 2, 3, 4):
                rest = recursive_A_vacuum(m - 1, ell - k, ops)
                if len(rest):
                    val = val + apply_to_vacuum_state(ops[k], rest)
        ops._vac[key] = val
    return ops._vac[key]


def multi_index_A(m: int, ell: int, ops: InteractionOperators) -> WickPolynomial:
    """``Σ_{α ∈ {1..4}^m, |α| = ℓ} A_{α_1}···A_{α_m}``, folded left to right.

    No index truncation is applied, so this agrees with :func:`recursive_A`
    on the vacuum, not necessarily as an operator.
    """
    V = ops.n_sites
    total = WickPolynomial.zero(V)
    for alpha in itertools.product((1, 2, 3, 4), repeat=m):
        if sum(alpha) != ell:
            continue
        prod = ops[alpha[0]]
        for k in alpha[1:]:
            prod = normal_ordered_product(prod, ops[k])
        total = total + prod
    return total


def wick_pairing(m: int, ell: int, power: int, ops: InteractionOperators, f, field_states: dict | None = None):
    """``<A_ℓ^{(m)}Ω, Φ(f)^power Ω>`` in the Wick algebra."""
    if field_states is not None and power in field_states:
        phi = field_states[power]
    else:
        phi = field_power_state(f, power)
    return vacuum_pairing(recursive_A_vacuum(m, ell, ops), phi)


# expansion coefficients


@dataclass
class CoefficientValue:
    """``C_{j2/2}(u, f)``; ``value`` is an array when ``u`` is a batch."""

    j2: int
    value: object
    u: np.ndarray
    f: np.ndarray

    @property
    def j(self) -> float:
        return self.j2 / 2


def gaussian_moment(f, k: int) -> float:
    """``(-1)^k ‖f‖^{2k} / (k! 4^k)``, the Ω-term of ``C_k``."""
    n2 = float(np.sum(np.abs(np.asarray(f)) ** 2))
    return (-1) ** k * n2**k / (math.factorial(k) * 4**k)


def field_moment(f, j2: int) -> complex:
    """``(i^{j2}/j2!) <Ω, Φ(f)^{j2} Ω>`` through the Wick algebra."""
    f = np.asarray(f, dtype=complex)
    if j2 % 2:
        return 0j
    half = field_power_state(f, j2 // 2)
    return complex(1j**j2 / math.factorial(j2) * vacuum_pairing(half, half))


def coefficient_series(j2_max: int, u, f, g: Graph, beta: float, kappa: float, lam: float) -> dict[int, object]:
    """``C_{j2/2}(u, f)`` for ``j2 = 0..j2_max`` sharing one recursion table."""
    u = np.asarray(u, dtype=complex)
    f = np.asarray(f, dtype=complex).reshape(-1)
    if f.shape[0] != g.vertex_count:
        raise ValueError(f"f has {f.shape[0]} entries but the graph has {g.vertex_count} vertices")
    ops = build_interaction_operators(u, g, kappa, lam)
    batch_shape = u.shape[:-1]
    fields = {k: field_power_state(f, k) for k in range(j2_max + 1)}
    out = {}
    for j2 in range(j2_max + 1):
        if j2 == 0:
            out[0] = np.ones(batch_shape, dtype=complex) if batch_shape else 1.0 + 0j
            continue
        val = field_moment(f, j2) if j2 % 2 == 0 else 0j
        val = val + np.zeros(batch_shape, dtype=complex)
        for m in range(1, j2 + 1):
            pre = (-beta) ** m / math.factorial(m)
            for ell in range(m, min(4 * m - 2, j2) + 1):
                pair = vacuum_pairing(recursive_A_vacuum(m, ell, ops), fields[j2 - ell])
                val = val + pre * 1j ** (j2 - ell) / math.factorial(j2 - ell) * pair
        out[j2] = val if batch_shape else complex(val)
    return out


def coefficient_C(j2: int, u, f, g: Graph, beta: float, kappa: float, lam: float) -> CoefficientValue:
    """Expansion coefficient ``C_{j2/2}(u, f)`` of the Weyl-operator Gibbs trace."""
    if j2 < 0 or int(j2) != j2:
        raise ValueError(f"j2 must be a non-negative integer, got {j2}")
    j2 = int(j2)
    val = coefficient_series(j2, u, f, g, beta, kappa, lam)[j2]
    return CoefficientValue(j2, val, np.asarray(u, dtype=complex), np.asarray(f, dtype=complex))


def _ip(a, b):
    # <a, b> conjugate-linear in the first slot, summed over the last axis
    return np.sum(np.conj(a) * b, axis=-1)


def closed_form_C1(u, f, beta: float, kappa: float, lam: float, g: Graph):
    """``-‖f‖²/4 - iβ/√2 <h^H(u), f> + β²/2 ‖h^H(u)‖²``."""
    u = np.asarray(u, dtype=complex)
    f = np.asarray(f, dtype=complex)
    h = hartree(u, g, kappa, lam)
    return -np.sum(np.abs(f) ** 2) / 4 - 1j * beta / math.sqrt(2) * _ip(h, f) + beta**2 / 2 * _ip(h, h).real


def _closed_form_C2(u, f, beta, kappa, lam, g, order1_lam):
    u = np.asarray(u, dtype=complex)
    f = np.asarray(f, dtype=complex)
    h = hartree(u, g, kappa, lam)
    mL = -build_laplacian(g)
    s2 = math.sqrt(2)
    fn = np.sum(np.abs(f) ** 2)
    hn = _ip(h, h).real
    hf = _ip(h, f)
    u2 = u * u
    t0 = fn**2 / 32
    t1 = -beta * (-1j / (4 * s2) * fn * hf - order1_lam * _ip(u2, f * f))
    t2 = beta**2 * (
        -hn * fn / 8
        - hf**2 / 4
        + lam * 1j / (2 * s2) * _ip(u2, h * f)
        + 1j / (2 * s2) * _ip(h, f @ mL.T)
        - kappa * 1j / (2 * s2) * hf
        + lam * 1j / s2 * _ip(u * h, u * f)
        + lam**2 / 4 * np.sum(np.abs(u) ** 4, axis=-1)
    )
    t3 = -(beta**3) * (
        1j / (2 * s2) * hf * hn
        + lam / 6 * _ip(u2, h * h)
        + _ip(h, h @ mL.T) / 6
        - kappa / 6 * hn
        + lam / 3 * np.sum(np.abs(u * h) ** 2, axis=-1)
        + lam / 6 * _ip(h * h, u2)
    )
    t4 = beta**4 / 8 * hn**2
    return t0 + t1 + t2 + t3 + t4


def closed_form_C2(u, f, beta: float, kappa: float, lam: float, g: Graph):
    """Reference closed form of ``C_2(u, f)``, transcribed term by term.

    All eight bracketed groups, with ``(λ/8)<u², f²>`` in the order-β group.
    That coefficient is off by a factor two: the series gives
    ``coefficient_C(4) - closed_form_C2 = (βλ/8)<u², f²>`` exactly. See
    :func:`closed_form_C2_rederived`.
    """
    return _closed_form_C2(u, f, beta, kappa, lam, g, lam / 8)


def closed_form_C2_rederived(u, f, beta: float, kappa: float, lam: float, g: Graph):
    """:func:`closed_form_C2` with ``(λ/4)<u², f²>`` in the order-β group.

    The term is ``-(1/2)<A₂Ω, Φ(f)²Ω>`` with ``A₂Ω ∋ (λ/2)Σ u_x² a*_x²Ω`` and
    ``Φ(f)²Ω ∋ (1/2)Σ f_x² a*_x²Ω``; the pairing carries ``2! = 2``, giving
    ``(λ/2)<u², f²>`` times ``-1/2``. Agrees with :func:`coefficient_C` to
    rounding.
    """
    return _closed_form_C2(u, f, beta, kappa, lam, g, lam / 4)


# independent matrix route


class SectorOracle:
    """``A₁..A₄`` and ``Φ(f)`` as sparse matrices on a truncated Fock space.

    Every factor raises the particle number by at most two, so with cutoff
    ``2m + power`` the vectors ``A_ℓ^{(m)}Ω`` and ``Φ(f)^power Ω`` are exact.
    Uses only the ladder matrices, never the Wick algebra.
    """

    def __init__(self, u, f, g: Graph, kappa: float, lam: float, n_max: int):
        from scipy import sparse

        from .fock import FockBasis, ladder_matrix

        u = np.asarray(u, dtype=complex).reshape(-1)
        f = np.asarray(f, dtype=complex).reshape(-1)
        V = g.vertex_count
        self.basis = FockBasis(g, n_max)
        a = [sparse.csr_matrix(ladder_matrix(self.basis, x, "annihilation").matrix) for x in range(V)]
        ad = [m.conj().T.tocsr() for m in a]
        hH = hartree(u, g, kappa, lam)
        B = -build_laplacian(g) - kappa * np.eye(V)
        dim = self.basis.dimension
        A1 = sparse.csr_matrix((dim, dim), dtype=complex)
        A2 = sparse.csr_matrix((dim, dim), dtype=complex)
        A3 = sparse.csr_matrix((dim, dim), dtype=complex)
        A4 = sparse.csr_matrix((dim, dim), dtype=complex)
        for x in range(V):
            A1 = A1 + hH[x] * ad[x] + np.conj(hH[x]) * a[x]
            for y in range(V):
                if B[x, y] != 0:
                    A2 = A2 + B[x, y] * (ad[x] @ a[y])
            A2 = A2 + lam / 2 * (u[x] ** 2 * ad[x] @ ad[x] + 4 * abs(u[x]) ** 2 * ad[x] @ a[x] + np.conj(u[x]) ** 2 * a[x] @ a[x])
            A3 = A3 + lam * (u[x] * ad[x] @ ad[x] @ a[x] + np.conj(u[x]) * ad[x] @ a[x] @ a[x])
            A4 = A4 + lam / 2 * ad[x] @ ad[x] @ a[x] @ a[x]
        self.A = {1: A1, 2: A2, 3: A3, 4: A4}
        self.phi = sum(np.conj(f[x]) * a[x] + f[x] * ad[x] for x in range(V)) / math.sqrt(2)
        self.omega = self.basis.vacuum().astype(complex)
        self._vec: dict = {}
        self._phi_vec = {0: self.omega}

    def A_vector(self, m: int, ell: int) -> np.ndarray:
        if ell < m or ell > 4 * m - 2:
            return np.zeros_like(self.omega)
        if (m, ell) not in self._vec:
            if m == 1:
                v = self.A[ell] @ self.omega
            else:
                v = sum(self.A[k] @ self.A_vector(m - 1, ell - k) for k in (1, 2, 3, 4))
            self._vec[m, ell] = v
        return self._vec[m, ell]

    def field_vector(self, power: int) -> np.ndarray:
        if power not in self._phi_vec:
            self._phi_vec[power] = self.phi @ self.field_vector(power - 1)
        return self._phi_vec[power]

    def pairing(self, m: int, ell: int, power: int) -> complex:
        return complex(np.vdot(self.A_vector(m, ell), self.field_vector(power)))


def sector_oracle_pairing(m: int, ell: int, power: int, u, f, g: Graph, kappa: float, lam: float) -> complex:
    """``<A_ℓ^{(m)}Ω, Φ(f)^power Ω>`` from exact matrices at cutoff ``2m + power``."""
    return SectorOracle(u, f, g, kappa, lam, 2 * m + power).pairing(m, ell, power)
