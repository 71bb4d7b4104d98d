import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from bosegibbs.fock import (
    CutoffError,
    FockBasis,
    FockOperator,
    ModelParams,
    build_hamiltonian,
    ladder_matrix,
    weyl_operator,
)
from bosegibbs.lattice import Graph
from bosegibbs.spectral import (
    OverflowGuardError,
    gibbs_trace,
    kms_defect,
    quantum_bundle,
    quantum_lhs,
    rdm_quantum,
)

Z_BETA = math.pi * quad(lambda r: math.exp(-(r + r * r / 2)), 0, np.inf, epsabs=1e-14)[0]


def _op(b, M, herm=True):
    return FockOperator(b, np.asarray(M, dtype=complex), herm)


def test_gibbs_trace_trivial_cases():
    b = FockBasis(Graph.path(2), 2)
    I = np.eye(b.dimension)
    assert np.isclose(gibbs_trace(_op(b, 0 * I), _op(b, I), 1.0), b.dimension)
    h = np.linspace(-1, 2, b.dimension)
    assert np.isclose(gibbs_trace(_op(b, np.diag(h)), _op(b, I), 0.7), np.sum(np.exp(-0.7 * h)))


def test_gibbs_trace_single_site_series():
    p = ModelParams(0.2, 1.3, -0.9, 0.6)
    b = FockBasis(Graph(1), 12)
    n = np.arange(13)
    expect = np.sum(np.exp(-p.beta * (-p.epsilon * p.kappa * n + p.epsilon**2 * p.lam / 2 * n * (n - 1))))
    val = gibbs_trace(build_hamiltonian(b, p), _op(b, np.eye(13)), p.beta)
    assert np.isclose(val, expect, rtol=1e-13)


def test_gibbs_trace_matches_expm():
    rng = np.random.default_rng(3)
    b = FockBasis(Graph.path(2), 3)
    H = rng.normal(size=(b.dimension,) * 2)
    H = H + H.T
    A = rng.normal(size=H.shape) + 1j * rng.normal(size=H.shape)
    val = gibbs_trace(_op(b, H), _op(b, A, False), 0.8)
    assert np.isclose(val, np.trace(expm(-0.8 * H) @ A), rtol=1e-12)


def test_gibbs_trace_rejects_other_basis():
    b1, b2 = FockBasis(Graph(1), 2), FockBasis(Graph(1), 3)
    with pytest.raises(ValueError):
        gibbs_trace(_op(b1, np.eye(3)), _op(b2, np.eye(4)), 1.0)


def test_lambda_zero_geometric_series():
    for eps in (0.3, 0.05):
        p = ModelParams(eps, 1.0, -1.0, 0.0)
        r = quantum_lhs(Graph(1), p, [0.0], tol=1e-13)
        exact = eps * math.pi / (1 - math.exp(p.beta * eps * p.kappa))
        assert abs(r.value - exact) <= 1e-10 * exact
        assert r.error < 1e-10 * exact


def test_lambda_zero_rdm_series():
    eps = 0.1
    p = ModelParams(eps, 1.0, -1.0, 0.0)
    q = math.exp(p.beta * eps * p.kappa)
    r = rdm_quantum(Graph(1), p, 0, 0, tol=1e-13)
    assert np.isclose(r.value, eps * math.pi * eps * q / (1 - q) ** 2, rtol=1e-10)


def test_partition_tends_to_gibbs_normalization():
    vals = [quantum_lhs(Graph(1), ModelParams(e, 1.0, -1.0, 1.0), [0.0], tol=1e-12).value.real for e in (1e-2, 1e-3)]
    # first-order convergence: the gap shrinks tenfold with epsilon
    ratio = abs(vals[0] - Z_BETA) / abs(vals[1] - Z_BETA)
    assert 8 < ratio < 12


def test_frozen_single_site_value():
    r = quantum_lhs(Graph(1), ModelParams(0.1, 1.0, -1.0, 1.0), [1.0], tol=1e-13)
    assert abs(r.value - 1.7210720273751685) < 1e-13
    assert r.error < 1e-13


def test_frozen_path2_bundle():
    b = quantum_bundle(Graph.path(2), ModelParams(0.1, 1.0, -1.0, 1.0), np.array([1.0, 0.0]), tol=1e-13, rdm_pairs=[(0, 0), (0, 1)])
    frozen = {"weyl": 2.1359086618129237, "partition": 2.664102468476171, "rdm_0_0": 1.0298857245834017, "rdm_0_1": 0.4310686370989256}
    for k, v in frozen.items():
        assert abs(b[k].value - v) < 1e-12, k


def test_bundle_matches_dense_brute_force():
    g = Graph.path(2)
    p = ModelParams(0.3, 1.0, -1.0, 1.0)
    f = np.array([0.7 + 0.2j, -0.4j])
    b = FockBasis(g, 45)
    H = build_hamiltonian(b, p)
    scale = (p.epsilon * math.pi) ** 2
    W = weyl_operator(b, f, p.epsilon)
    a0, a1 = (ladder_matrix(b, x, "annihilation").matrix for x in (0, 1))
    rdm = _op(b, p.epsilon * a0.conj().T @ a1, False)
    res = quantum_bundle(g, p, f, tol=1e-12, rdm_pairs=[(0, 1)])
    assert abs(res["weyl"].value - scale * gibbs_trace(H, W, p.beta)) < 1e-9
    assert abs(res["rdm_0_1"].value - scale * gibbs_trace(H, rdm, p.beta)) < 1e-9
    assert abs(res["partition"].value - scale * gibbs_trace(H, _op(b, np.eye(b.dimension)), p.beta)) < 1e-9


def test_f_zero_and_weyl_below_partition():
    g = Graph.path(2)
    p = ModelParams(0.2, 1.0, -1.0, 1.0)
    res = quantum_bundle(g, p, np.zeros(2), tol=1e-12)
    assert np.isclose(res["weyl"].value, res["partition"].value, rtol=1e-13)
    res = quantum_bundle(g, p, np.array([1.0, 1j]), tol=1e-12)
    assert abs(res["weyl"].value) < res["partition"].value.real


def test_edgeless_off_diagonal_rdm_vanishes():
    r = rdm_quantum(Graph(2), ModelParams(0.2, 1.0, -1.0, 1.0), 0, 1, tol=1e-12)
    assert abs(r.value) < 1e-14


def test_rdm_bad_vertex():
    with pytest.raises(IndexError):
        rdm_quantum(Graph(1), ModelParams(0.2, 1.0, -1.0, 1.0), 0, 1)


def test_f_length_checked():
    with pytest.raises(ValueError):
        quantum_lhs(Graph.path(2), ModelParams(0.2, 1.0, -1.0, 1.0), [1.0])


def test_cutoff_ceiling_exhausted():
    with pytest.raises(CutoffError):
        quantum_lhs(Graph(1), ModelParams(0.01, 1.0, -1.0, 1.0), [1.0], tol=1e-13, ceiling=16)


def test_history_records_doubling():
    r = quantum_lhs(Graph.path(2), ModelParams(0.2, 1.0, -1.0, 1.0), [1.0, 0.0], tol=1e-12)
    assert r.cutoff_used >= 8
    d = r.to_dict()
    assert d["cutoff_used"] == r.cutoff_used and len(d["value"]) == 2


def test_kms_examples():
    rng = np.random.default_rng(11)
    b = FockBasis(Graph.path(2), 3)  # dimension 10
    H = rng.normal(size=(10, 10))
    H = (H + H.T) / 2
    Hop = _op(b, H)
    I = _op(b, np.eye(10))
    assert kms_defect(Hop, I, I, 1.0) < 1e-14
    assert kms_defect(Hop, Hop, Hop, 1.0) < 1e-12
    ev = np.linalg.eigvalsh(H)
    beta = 20.0 / (ev[-1] - ev[0])
    for _ in range(5):
        A, B = rng.normal(size=(2, 10, 10)) + 1j * rng.normal(size=(2, 10, 10))
        d = kms_defect(Hop, _op(b, (A + A.conj().T) / 2), _op(b, (B + B.conj().T) / 2), beta)
        assert d < 1e-8


def test_kms_guard():
    b = FockBasis(Graph(1), 3)
    H = _op(b, np.diag([0.0, 1.0, 2.0, 3.0]))
    with pytest.raises(OverflowGuardError):
        kms_defect(H, H, H, 1000.0)


def test_kms_identity_against_expm():
    rng = np.random.default_rng(5)
    b = FockBasis(Graph(2), 2)
    d = b.dimension
    H = rng.normal(size=(d, d))
    H = (H + H.T) / 2
    A, B = rng.normal(size=(2, d, d))
    beta = 0.9
    rho = expm(-beta * H)
    lhs = np.trace(rho @ A @ rho @ B @ expm(beta * H)) / np.trace(rho)
    rhs = np.trace(rho @ B @ A) / np.trace(rho)
    assert abs(lhs - rhs) < 1e-10
    assert kms_defect(_op(b, H), _op(b, A, False), _op(b, B, False), beta) < 1e-12
