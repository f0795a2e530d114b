import numpy as np
import pytest

from matchnoise.channels import NoiseModel, evolve_noise
from matchnoise.closed_forms import nk_tfim_xy, plateau_temperature, teff
from matchnoise.dynamics import (
    CirculantParityState, ParityResolvedState, evolve_master, evolve_pbc, evolve_pbc_circulant,
    finite_chain_occupations, ground_state_of, mode_occupations, normal_modes, parity_mixing_step,
    propagator, quadratic_generator, unitary_step,
)
from matchnoise.gaussian import (
    ModelParams, build_ground_state, dispersion, energy, parity_sign, quasiparticle_occupation,
    random_gaussian_state,
)
from matchnoise.oracles import (
    DenseState, HamiltonianStep, KrausChannel, LindbladSegment, dense_channel_oracle,
    majorana_hamiltonian, spin_hamiltonian,
)


def _random_generator(n, rng):
    return quadratic_generator(hopping=rng.normal(size=n - 1), pairing=rng.normal(size=n - 1),
                               field=rng.normal(size=n))


# generators

def test_even_sector_spectrum_on_antiperiodic_grid():
    p = ModelParams("tfim", 1.0, 0.7, 8, "pbc")
    A = quadratic_generator(p, "periodic_even").matrix
    w = np.sort(np.linalg.eigvalsh(1j * A))
    k = 2 * np.pi * (np.arange(8) + 0.5) / 8
    eps = np.sort(dispersion(k, p))
    assert np.allclose(w[8:], eps, atol=1e-10)
    assert np.allclose(w[:8], -eps[::-1], atol=1e-10)


def test_sectors_differ_only_at_boundary_bond():
    p = ModelParams("tfim", 1.0, 0.7, 6, "pbc")
    diff = quadratic_generator(p, "periodic_even").matrix - quadratic_generator(p, "periodic_odd").matrix
    rows, cols = np.nonzero(diff)
    assert set(rows // 2) | set(cols // 2) == {0, 5}


def test_zero_couplings():
    gen = quadratic_generator(n_sites=4)
    assert not gen.matrix.any()


def test_single_bond_spectrum():
    # one hopping bond between two sites: 2x2 single-particle matrix [[0, J], [J, 0]]
    gen = quadratic_generator(hopping=[1.0, 0.0, 0.0], field=np.zeros(4))
    w = np.sort(np.linalg.eigvalsh(1j * gen.matrix))
    assert np.allclose(w, [-1, -1, 0, 0, 0, 0, 1, 1], atol=1e-12)
    h2 = np.linalg.eigvalsh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(np.unique(np.round(np.abs(w[w != 0]), 12)), np.abs(h2[1]))


def test_inconsistent_lengths():
    with pytest.raises(ValueError):
        quadratic_generator(hopping=[1.0], field=[0.0, 0.0, 0.0])


def test_generator_matches_dense_hamiltonian():
    p = ModelParams("tfim", 1.0, 0.6, 5, "obc")
    H = majorana_hamiltonian(quadratic_generator(p, "open").matrix)
    assert np.max(np.abs(H - spin_hamiltonian("tfim", 5, 1.0, 0.6))) < 1e-12


def test_normal_modes_paths_agree():
    p = ModelParams("tfim", 1.0, 1.0, 40, "obc")
    gen = quadratic_generator(p, "open")
    eps, O = normal_modes(gen)
    assert np.max(np.abs(O.T @ O - np.eye(80))) < 1e-10
    lo, Olo = normal_modes(gen, select=(0, 5))
    assert np.allclose(lo, eps[:5])
    M = random_gaussian_state(40, 0)
    assert np.allclose(mode_occupations(M, modes=(lo, Olo))[1], mode_occupations(M, gen)[1][:5], atol=1e-10)


# unitary steps

def test_unitary_step_identity_and_orthogonality():
    rng = np.random.default_rng(3)
    gen = _random_generator(6, rng)
    M = random_gaussian_state(6, rng)
    assert np.allclose(unitary_step(M, gen, 0.0).matrix, M.matrix)
    O = propagator(gen, 0.37)
    assert np.max(np.abs(O.T @ O - np.eye(12))) < 1e-12


def test_ground_state_stationary():
    p = ModelParams("tfim", 1.0, 0.8, 10, "obc")
    gen = quadratic_generator(p, "open")
    gs = ground_state_of(gen)
    assert np.max(np.abs(unitary_step(gs, gen, 1.3).matrix - gs.matrix)) < 1e-10


def test_unitary_step_vs_dense():
    rng = np.random.default_rng(4)
    gen = _random_generator(5, rng)
    M = random_gaussian_state(5, rng)
    ref = dense_channel_oracle(DenseState.from_covariance(M), [HamiltonianStep(majorana_hamiltonian(gen.matrix), 0.3)])
    assert np.max(np.abs(unitary_step(M, gen, 0.3).matrix - ref.covariance())) < 1e-10


def test_unitary_preserves_purity_parity_energy():
    p = ModelParams("tfim", 1.0, 0.9, 8, "obc")
    gen = quadratic_generator(p, "open")
    M = random_gaussian_state(8, np.random.default_rng(6), pure=True)
    O = propagator(gen, 0.01)
    e0 = energy(M, gen)
    m = M.matrix
    for _ in range(1000):
        m = O @ m @ O.T
    assert abs(energy(m, gen) - e0) < 1e-9
    assert np.max(np.abs(m @ m + np.eye(16))) < 1e-9
    assert parity_sign(m) == parity_sign(M)


def test_sparse_propagator_matches_dense():
    p = ModelParams("tfim", 1.0, 1.0, 300, "obc")
    gen = quadratic_generator(p, "open")
    Os = propagator(gen, 0.05, sparse=True)
    Od = propagator(gen, 0.05, sparse=False)
    assert np.max(np.abs(Os.toarray() - Od)) < 1e-13


# master equation

def test_master_without_noise_is_unitary():
    rng = np.random.default_rng(7)
    gen = _random_generator(5, rng)
    M = random_gaussian_state(5, rng)
    out = evolve_master(M, gen, NoiseModel.continuous(5), 0.5, 0.05)
    ref = M
    for _ in range(10):
        ref = unitary_step(ref, gen, 0.05)
    assert np.max(np.abs(out.matrix - ref.matrix)) < 1e-12


def test_master_without_hamiltonian_is_noise_only():
    rng = np.random.default_rng(8)
    M = random_gaussian_state(5, rng)
    noise = NoiseModel.continuous(5, *rng.uniform(0, 1, (3, 5)))
    out = evolve_master(M, quadratic_generator(n_sites=5), noise, 0.8, 0.1)
    assert np.max(np.abs(out.matrix - evolve_noise(M, noise, 0.8).matrix)) < 1e-12


def test_master_vs_dense_lindblad():
    rng = np.random.default_rng(9)
    gen = _random_generator(6, rng)
    M = random_gaussian_state(6, rng)
    noise = NoiseModel.continuous(6, *rng.uniform(0, 0.5, (3, 6)))
    H = majorana_hamiltonian(gen.matrix)
    ref = dense_channel_oracle(DenseState.from_covariance(M), [LindbladSegment.from_noise(H, noise, 0.5)])
    out = evolve_master(M, gen, noise, 0.5, 1e-3)
    assert np.max(np.abs(out.matrix - ref.covariance())) < 1e-6


def test_strang_second_order():
    rng = np.random.default_rng(10)
    gen = _random_generator(6, rng)
    M = random_gaussian_state(6, rng)
    noise = NoiseModel.continuous(6, *rng.uniform(0, 1, (3, 6)))
    ref = evolve_master(M, gen, noise, 1.0, 0.1 / 8).matrix
    e1 = np.max(np.abs(evolve_master(M, gen, noise, 1.0, 0.1).matrix - ref))
    e2 = np.max(np.abs(evolve_master(M, gen, noise, 1.0, 0.05).matrix - ref))
    assert 3.0 < e1 / e2 < 5.0


def test_master_rejects_periodic_generator():
    p = ModelParams("tfim", 1.0, 1.0, 4, "pbc")
    with pytest.raises(ValueError):
        evolve_master(build_ground_state(p), quadratic_generator(p, "periodic_even"), NoiseModel.xy(4, 1.0), 0.1)


# parity sectors

def test_parity_mixing_identity_at_zero_time():
    p = ModelParams("tfim", 1.0, 1.0, 4, "pbc")
    s = ParityResolvedState.ground_state(p)
    out = parity_mixing_step(s, NoiseModel.xy(4, 1.0), 0.0)
    assert np.array_equal(out.gamma_plus, s.gamma_plus) and np.array_equal(out.gamma_minus, s.gamma_minus)


def test_parity_mixing_sum_recovery():
    rng = np.random.default_rng(12)
    s = ParityResolvedState(random_gaussian_state(5, rng).matrix * 0.6, random_gaussian_state(5, rng).matrix * 0.4, 0.6, 0.4)
    noise = NoiseModel.continuous(5, *rng.uniform(0, 1, (3, 5)))
    out = parity_mixing_step(s, noise, 0.37)
    expected = evolve_noise(s.total(), noise, 0.37).matrix
    assert np.max(np.abs(out.total().matrix - expected)) < 1e-13
    assert out.w_plus + out.w_minus == pytest.approx(1.0, abs=1e-15)


def test_sector_blocks_vs_projected_dense():
    N = 4
    H = spin_hamiltonian("tfim", N, 1.0, 0.8, periodic=True)
    gs = DenseState.ground_state(H)
    noise = NoiseModel.xy_channel(N, 0.13)
    rho = dense_channel_oracle(gs, [KrausChannel.from_noise(noise)])
    out = parity_mixing_step(ParityResolvedState.from_state(gs.covariance(), 1), noise)
    for parity, block, w in ((1, out.gamma_plus, out.w_plus), (-1, out.gamma_minus, out.w_minus)):
        proj = rho.parity_projected(parity)
        assert np.max(np.abs(proj.covariance() - block)) < 1e-10
        assert np.trace(proj.rho).real == pytest.approx(w, abs=1e-12)


def test_pbc_ground_state_stationary_without_noise():
    p = ModelParams("tfim", 1.0, 1.0, 8, "pbc")
    s = ParityResolvedState.ground_state(p)
    out = evolve_pbc(s, p, NoiseModel.continuous(8), 1.0, 0.05)
    assert np.max(np.abs(out.total().matrix - s.total().matrix)) < 1e-10


def test_pbc_vs_dense_lindblad():
    N = 6
    p = ModelParams("tfim", 1.0, 1.0, N, "pbc")
    H = spin_hamiltonian("tfim", N, 1.0, 1.0, periodic=True)
    noise = NoiseModel.xy(N, 1.0)
    ref = dense_channel_oracle(DenseState.ground_state(H), [LindbladSegment.from_noise(H, noise, 1.0)])
    out = evolve_pbc(ParityResolvedState.ground_state(p), p, noise, 1.0, 1e-3)
    k = 2 * np.pi * (np.arange(N) + 0.5) / N
    n_ref = quasiparticle_occupation(ref.covariance(), k, p)
    n_out = quasiparticle_occupation(out.total(), k, p)
    assert np.max(np.abs(n_ref - n_out)) < 1e-5


def test_circulant_path_matches_dense_pbc():
    p = ModelParams("tfim", 1.0, 0.9, 10, "pbc")
    noise = NoiseModel.xy(10, 0.7)
    a = evolve_pbc(ParityResolvedState.ground_state(p), p, noise, 0.6, 0.02)
    b = evolve_pbc_circulant(CirculantParityState.ground_state(p), p, noise, 0.6, 0.02)
    assert np.max(np.abs(a.total().matrix - b.total().matrix)) < 1e-12
    assert b.w_plus == pytest.approx(a.w_plus, abs=1e-14)


def test_circulant_ground_state_matches_dense():
    for kind, N in (("tfim", 9), ("xx", 8), ("xx", 6)):
        p = ModelParams(kind, 1.0, 0.7, N, "pbc")
        c = CirculantParityState.ground_state(p).total().matrix
        assert np.max(np.abs(c - build_ground_state(p).matrix)) < 1e-12


def test_pbc_approaches_noise_only_curve():
    # Hamiltonian plus noise at gt = 1: finite-size changes shrink with N and the
    # low-energy temperature settles near the noise-only plateau
    p_low = []
    for N in (32, 64, 128, 256, 512):
        eps, n = finite_chain_occupations(ModelParams("tfim", 1.0, 1.0, N, "pbc"), 1.0)
        p_low.append(float(teff(eps[0], n[0])))
    steps = np.abs(np.diff(p_low))
    assert np.all(np.diff(steps) < 0)
    assert abs(p_low[-1] / plateau_temperature(1.0) - 1) < 0.05
    eps, n = finite_chain_occupations(ModelParams("tfim", 1.0, 1.0, 512, "pbc"), 1.0)
    k = 2 * np.arcsin(eps / 4)
    assert np.max(np.abs(n - nk_tfim_xy(k, 1.0))) < 0.05


def test_finite_chain_occupations_open():
    eps, n = finite_chain_occupations(ModelParams("tfim", 1.0, 1.0, 24, "obc"), 0.5, n_modes=6)
    assert eps.shape == (6,) and np.all(np.diff(eps) > 0)
    assert np.all((n > 0) & (n < 0.5))
