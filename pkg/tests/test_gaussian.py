import math

import numpy as np
import pytest

from matchnoise.channels import NoiseModel, evolve_noise
from matchnoise.closed_forms import nk_tfim_xy
from matchnoise.dynamics import ground_state_of, quadratic_generator, unitary_step
from matchnoise.gaussian import (
    DegeneratePointError, MajoranaCovariance, ModelParams, bogoliubov_angle, build_ground_state,
    critical_pair_correlator, dispersion, fermion_correlators, majorana_string_expectation,
    pair_correlator_general, pair_correlator_table, parity_sign, pfaffian, quasiparticle_coherence,
    quasiparticle_occupation, random_gaussian_state, spectral_point, vacuum,
)
from matchnoise.oracles import DenseState, spin_hamiltonian

CRIT = ModelParams("tfim", 1.0, 1.0)


# dispersion and angles

def test_dispersion_examples():
    assert dispersion(np.pi, CRIT) == pytest.approx(4.0, abs=1e-14)
    assert dispersion(0.0, CRIT) == pytest.approx(0.0, abs=1e-14)
    assert dispersion(np.pi / 2, ModelParams("xx", 1.0)) == pytest.approx(0.0, abs=1e-15)


def test_dispersion_matches_definition():
    k = np.linspace(-np.pi + 1e-3, np.pi, 101)
    for g, J in [(0.3, 1.0), (1.0, 1.0), (2.5, 0.7)]:
        p = ModelParams("tfim", J, g)
        ref = 2 * J * np.sqrt((np.cos(k) - g / J) ** 2 + np.sin(k) ** 2)
        assert np.max(np.abs(dispersion(k, p) - ref)) < 1e-12
    assert np.allclose(dispersion(k, ModelParams("xx", 1.3)), -2.6 * np.cos(k))


def test_bogoliubov_angle_examples():
    assert bogoliubov_angle(np.pi / 2, 1.0, 1.0) == pytest.approx(np.pi / 4, abs=1e-14)
    assert bogoliubov_angle(1e-12, 1.0, 1.0) == pytest.approx(np.pi / 2, abs=1e-10)
    assert bogoliubov_angle(0.0, 2.0, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_bogoliubov_angle_degenerate_point():
    with pytest.raises(DegeneratePointError):
        bogoliubov_angle(0.0, 1.0, 1.0)
    assert bogoliubov_angle(0.0, 1.0, 1.0, side=1) == pytest.approx(np.pi / 2)


def test_angle_consistent_with_energy():
    k = np.linspace(0.05, np.pi, 40)
    for g in (0.4, 1.0, 1.7):
        p = ModelParams("tfim", 1.0, g)
        eps, th = dispersion(k, p), bogoliubov_angle(k, g, 1.0)
        assert np.allclose(eps * np.cos(th), 2 * g - 2 * np.cos(k), atol=1e-12)
        assert np.allclose(eps * np.sin(th), 2 * np.sin(k), atol=1e-12)


def test_spectral_point():
    sp = spectral_point(np.pi / 2, CRIT)
    assert sp.energy == pytest.approx(2 * math.sqrt(2))
    assert sp.angle == pytest.approx(np.pi / 4)


# pair correlators

def test_critical_pair_correlator_examples():
    assert critical_pair_correlator(0, "cos") == pytest.approx(2 / np.pi)
    assert critical_pair_correlator(0, "sin") == 0.0
    assert critical_pair_correlator(1, "cos") == pytest.approx(-2 / (3 * np.pi))


def test_general_correlator_reduces_at_criticality():
    for d in range(0, 65):
        assert abs(pair_correlator_general(d, 1.0, 1.0, "cos") - critical_pair_correlator(d, "cos")) < 1e-10
    for d in (1, 5, 64):
        assert abs(pair_correlator_general(d, 1.0, 1.0, "sin") - critical_pair_correlator(d, "sin")) < 1e-10


def test_general_correlator_paramagnet_limit():
    assert pair_correlator_general(0, 1e6, 1.0, "cos") == pytest.approx(1.0, abs=1e-6)


def test_general_correlator_vs_finite_chain_bulk():
    # F_cos(d) = (M_{2m,2n+1}(d) + M_{2m,2n+1}(-d))/2, d = m - n, deep in a 512-site open chain
    p = ModelParams("tfim", 1.0, 1.5, 512, "obc")
    M = ground_state_of(quadratic_generator(p, "open")).matrix
    m = 256
    bulk = 0.5 * (M[2 * m, 2 * (m - 3) + 1] + M[2 * (m - 3), 2 * m + 1])
    assert abs(pair_correlator_general(3, 1.5, 1.0, "cos") - bulk) < 1e-6


def test_correlator_table_matches_quadrature():
    F, A = pair_correlator_table(12, 1.5, 1.0)
    for d in (0, 3, 12):
        assert F[d] == pytest.approx(pair_correlator_general(d, 1.5, 1.0, "cos"), abs=1e-12)
        assert A[d] == pytest.approx(pair_correlator_general(d, 1.5, 1.0, "sin"), abs=1e-12)


# ground states

def test_critical_window_entries():
    M = build_ground_state(CRIT, window=16).matrix
    assert M[10, 11] == pytest.approx(2 / np.pi, abs=1e-14)
    # m - n = 1
    assert M[2 * 5, 2 * 4 + 1] == pytest.approx(-2 / np.pi, abs=1e-14)


def test_xx_ground_state_hopping():
    M = build_ground_state(ModelParams("xx", 1.0), window=12)
    G, _ = fermion_correlators(M)
    assert abs(G[7, 5]) < 1e-14
    assert G[6, 5] == pytest.approx(1 / np.pi, abs=1e-14)


def test_odd_xx_chain_rejected():
    with pytest.raises(ValueError):
        build_ground_state(ModelParams("xx", 1.0, size=7, boundary="pbc"))


@pytest.mark.parametrize("params", [
    ModelParams("tfim", 1.0, 1.0, 24, "obc"),
    ModelParams("tfim", 1.0, 0.6, 24, "pbc"),
    ModelParams("xx", 1.0, 0.0, 16, "pbc"),
    ModelParams("xx", 1.0, 0.0, 18, "obc"),
])
def test_finite_ground_state_is_pure(params):
    M = build_ground_state(params).matrix
    assert np.max(np.abs(M @ M + np.eye(M.shape[0]))) < 1e-10
    assert np.allclose(M, -M.T)


def test_finite_ground_state_matches_dense():
    for boundary in ("obc", "pbc"):
        p = ModelParams("tfim", 1.0, 0.8, 6, boundary)
        H = spin_hamiltonian("tfim", 6, 1.0, 0.8, periodic=boundary == "pbc")
        ref = DenseState.ground_state(H).covariance()
        assert np.max(np.abs(build_ground_state(p).matrix - ref)) < 1e-10


# occupations and coherences

def test_ground_state_occupation_vanishes():
    M = build_ground_state(CRIT, window=1024)
    k = np.linspace(0.3, np.pi, 12)
    assert np.max(np.abs(quasiparticle_occupation(M, k, CRIT))) < 1e-3
    # on the finite periodic chain the sum is exact
    p = ModelParams("tfim", 1.0, 1.0, 64, "pbc")
    kg = 2 * np.pi * (np.arange(32) + 0.5) / 64
    assert np.max(np.abs(quasiparticle_occupation(build_ground_state(p), kg, p))) < 1e-8


def test_fully_mixed_occupation():
    M = MajoranaCovariance(np.zeros((64, 64)))
    assert np.allclose(quasiparticle_occupation(M, np.linspace(0.1, 3, 7), CRIT), 0.5)
    assert np.allclose(quasiparticle_coherence(M, np.linspace(0.1, 3, 7), CRIT), 0.0)


def test_decohered_occupation_matches_closed_form():
    W = 1024
    M = evolve_noise(build_ground_state(CRIT, window=W), NoiseModel.xy(W, 1.0), 1.0)
    assert abs(quasiparticle_occupation(M, np.pi, CRIT) - nk_tfim_xy(np.pi, 1.0)) < 1e-6


def test_coherence_ground_state_zero():
    for g in (0.5, 1.0, 1.5):
        p = ModelParams("tfim", 1.0, g, 48, "pbc")
        kg = 2 * np.pi * (np.arange(24) + 0.5) / 48
        assert np.max(np.abs(quasiparticle_coherence(build_ground_state(p), kg, p))) < 1e-10


def test_coherence_extremum_on_window():
    W = 2048
    M = evolve_noise(build_ground_state(CRIT, window=W), NoiseModel.xy(W, 1.0), 0.41242)
    c = quasiparticle_coherence(M, 2 * np.pi / W, CRIT)
    assert abs(abs(c) - 0.04285) < 5e-4


def test_occupation_bounds_random_states():
    rng = np.random.default_rng(3)
    p = ModelParams("tfim", 1.0, 0.7, 10, "pbc")
    kg = 2 * np.pi * (np.arange(10) + 0.5) / 10
    for _ in range(20):
        M = random_gaussian_state(10, rng)
        n = quasiparticle_occupation(M, kg, p)
        assert np.all(n > -1e-9) and np.all(n < 1 + 1e-9)
        assert np.all(np.abs(quasiparticle_coherence(M, kg, p)) <= 0.5 + 1e-9)


# strings and parity

def test_string_expectation_examples():
    M = build_ground_state(CRIT, window=8)
    assert majorana_string_expectation(M, [4, 5]) == pytest.approx(2j / np.pi)
    assert majorana_string_expectation(M, []) == 1
    with pytest.raises(ValueError):
        majorana_string_expectation(M, [1, 1])


def test_four_point_function_vs_dense():
    H = spin_hamiltonian("tfim", 6, 1.0, 1.0)
    dense = DenseState.ground_state(H)
    M = dense.covariance()
    from matchnoise.oracles import jw_majoranas
    g = jw_majoranas(6)
    exact = dense.expectation(g[0] @ g[1] @ g[2] @ g[3])
    assert abs(majorana_string_expectation(M, [0, 1, 2, 3]) - exact) < 1e-10


def test_pfaffian_squares_to_determinant():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(8, 8))
    A = A - A.T
    assert pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-10)


def test_parity_examples():
    v = vacuum(5)
    assert parity_sign(v) == 1
    m = v.matrix.copy()
    m[4, 5], m[5, 4] = -1.0, 1.0
    assert parity_sign(m) == -1
    with pytest.raises(ValueError):
        parity_sign(0.5 * v.matrix)


def test_parity_matches_dense():
    p = ModelParams("tfim", 1.0, 2.0, 4, "obc")
    H = spin_hamiltonian("tfim", 4, 1.0, 2.0)
    dense = DenseState.ground_state(H)
    from matchnoise.oracles import pauli_matrix
    ref = np.real(dense.expectation(pauli_matrix(4, {j: "Z" for j in range(4)})))
    assert parity_sign(build_ground_state(p)) == round(ref)


def test_parity_invariant_under_rotation():
    p = ModelParams("tfim", 1.0, 0.9, 8, "obc")
    gen = quadratic_generator(p, "open")
    M = random_gaussian_state(8, np.random.default_rng(1), pure=True)
    assert parity_sign(unitary_step(M, gen, 0.37)) == parity_sign(M)
