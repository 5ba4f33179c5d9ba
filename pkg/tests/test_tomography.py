import numpy as np
import pytest

from pathent.decoy import DecoyIntensitySet
from pathent.fock import TruncatedOperator, hermite_functions
from pathent.homodyne import MeasurementSettings, sample_batch
from pathent.states import TwoModeFockState, bell_state
from pathent.tomography import (
    BinnedHistogram,
    MleConfig,
    build_povm_elements,
    decoy_corrected_histogram,
    fidelity,
    histogram_density,
    histogram_from_batches,
    load_density_matrix,
    mle_reconstruct,
    multiphoton_mass,
    save_density_matrix,
)

PHASE_PAIRS_4 = [
    (dt / 2.0, -dt / 2.0) for dt in (-np.pi, -np.pi / 2, 0.0, np.pi / 2)
]


def vacuum_state(cutoff):
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    amps[0, 0] = 1.0
    return TwoModeFockState(cutoff, amps)


class TestMleConfig:
    def test_bin_edges(self):
        cfg = MleConfig(cutoff=3, bin_width=0.5, x_range=2.0)
        edges = cfg.bin_edges()
        assert len(edges) == 9
        assert edges[0] == -2.0 and edges[-1] == 2.0
        assert np.allclose(np.diff(edges), 0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            MleConfig(cutoff=0)
        with pytest.raises(ValueError):
            MleConfig(bin_width=-0.1)
        with pytest.raises(ValueError):
            MleConfig(tolerance=0.0)


class TestPovm:
    def test_completeness_on_wide_range(self):
        edges = np.linspace(-12.0, 12.0, 49)
        povm = build_povm_elements(PHASE_PAIRS_4, edges, 3)
        d2 = 16
        for s in range(povm.n_settings):
            total = np.kron(povm.mode_a[s].sum(axis=0), povm.mode_b[s].sum(axis=0))
            assert np.max(np.abs(total - np.eye(d2))) < 1e-8
            assert np.max(np.abs(povm.complement(s))) < 1e-8

    def test_elements_psd_and_sum_below_identity(self):
        edges = np.linspace(-4.0, 4.0, 17)
        povm = build_povm_elements(PHASE_PAIRS_4, edges, 2)
        for s in range(povm.n_settings):
            total = np.kron(povm.mode_a[s].sum(axis=0), povm.mode_b[s].sum(axis=0))
            w = np.linalg.eigvalsh(total)
            assert w[0] >= -1e-10 and w[-1] <= 1.0 + 1e-10
            comp = povm.complement(s)
            assert np.linalg.eigvalsh(comp)[0] >= -1e-10

    def test_phase_factor_structure(self):
        edges = np.linspace(-3.0, 3.0, 7)
        phi = 0.9
        povm = build_povm_elements([(phi, 0.0)], edges, 2)
        base = build_povm_elements([(0.0, 0.0)], edges, 2)
        m, n = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
        factor = np.exp(1j * (n - m) * phi)
        assert np.allclose(povm.mode_a[0], base.mode_a[0] * factor[None], atol=1e-14)
        assert np.allclose(povm.mode_b[0], base.mode_b[0], atol=1e-14)

    def test_vacuum_diagonal_matches_gaussian_mass(self):
        from scipy.special import erf

        edges = np.array([-1.0, 1.0])
        povm = build_povm_elements([(0.0, 0.0)], edges, 1)
        assert povm.mode_a[0][0, 0, 0] == pytest.approx(float(erf(1.0)), abs=1e-12)

    def test_probabilities_match_explicit_kron(self):
        edges = np.linspace(-3.0, 3.0, 5)
        povm = build_povm_elements([(0.4, -0.4)], edges, 1)
        rng = np.random.default_rng(3)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        p_fast = povm.probabilities(rho, 0)
        for i in range(povm.n_bins):
            for j in range(povm.n_bins):
                el = np.kron(povm.mode_a[0][i], povm.mode_b[0][j])
                assert p_fast[i, j] == pytest.approx(
                    float(np.trace(rho @ el).real), abs=1e-12
                )

    def test_rejects_overlapping_bins(self):
        with pytest.raises(ValueError):
            build_povm_elements(PHASE_PAIRS_4, np.array([0.0, 1.0, 0.5]), 1)


class TestHistograms:
    def test_density_normalization(self):
        batch = sample_batch(0.0, MeasurementSettings(0.0, 0.0), 50_000, seed=21)
        edges = np.linspace(-5.0, 5.0, 51)
        dens = histogram_density(batch, edges)
        area = 0.2 * 0.2
        # Nearly all vacuum mass lies inside +-5.
        assert dens.sum() * area == pytest.approx(1.0, abs=1e-3)

    def test_negative_densities_rejected(self):
        edges = np.linspace(-1.0, 1.0, 3)
        with pytest.raises(ValueError):
            BinnedHistogram(
                phase_pairs=[(0.0, 0.0)],
                edges=edges,
                densities=-np.ones((1, 2, 2)),
            )

    def test_corrected_histogram_approximates_single_photon(self):
        from pathent.homodyne import joint_pdf_fock

        iset = DecoyIntensitySet((0.0872, 0.2314, 0.9840))
        edges = np.linspace(-5.0, 5.0, 26)
        pair = (np.pi / 8, -np.pi / 8)
        settings = MeasurementSettings(*pair)
        batches = {(0, 0): sample_batch(0.0, settings, 400_000, seed=130)}
        for j, mu in enumerate(iset.intensities, start=1):
            batches[(0, j)] = sample_batch(mu, settings, 150_000, seed=130 + j)
        hist = decoy_corrected_histogram(batches, iset, [pair], edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        expect = joint_pdf_fock(1, centers[:, None], centers[None, :], np.pi / 4)
        area = np.diff(edges)[0] ** 2
        expect = expect / (expect.sum() * area)
        # Statistical agreement only; the estimator weights amplify the
        # Monte Carlo noise considerably, so test the bulk shape.
        assert np.mean(np.abs(hist.densities[0] - expect)) < 0.02
        assert np.max(np.abs(hist.densities[0] - expect)) < 0.3
        assert hist.clamp_fraction[0] < 0.5

    def test_corrected_histogram_degenerate_raises(self):
        from pathent.homodyne import SampleBatch

        iset = DecoyIntensitySet((0.1,))
        edges = np.linspace(-1.0, 1.0, 3)
        settings = MeasurementSettings(0.0, 0.0)

        def batch(x):
            return SampleBatch(
                x_a=np.full(100, x),
                x_b=np.full(100, x),
                settings=settings,
                intensity_label=0,
                seed=0,
                pipeline="equivalent",
            )

        # Vacuum data in-range, decoy data entirely out of range: the
        # corrected density is negative everywhere and clamps to nothing.
        with pytest.raises(ArithmeticError):
            decoy_corrected_histogram(
                {(0, 0): batch(0.5), (0, 1): batch(50.0)}, iset, [(0.0, 0.0)], edges
            )

    def test_missing_batch_rejected(self):
        iset = DecoyIntensitySet((0.1,))
        with pytest.raises(ValueError):
            decoy_corrected_histogram({}, iset, [(0.0, 0.0)], np.linspace(-1, 1, 3))


class TestMle:
    def test_zero_iterations_returns_maximally_mixed(self):
        edges = MleConfig(cutoff=1, bin_width=0.5, x_range=3.0).bin_edges()
        cfg = MleConfig(cutoff=1, max_iterations=0, bin_width=0.5, x_range=3.0)
        povm = build_povm_elements(PHASE_PAIRS_4, edges, 1)
        nb = len(edges) - 1
        dens = np.full((4, nb, nb), 1.0 / (nb * nb * cfg.bin_width**2))
        hist = BinnedHistogram(phase_pairs=PHASE_PAIRS_4, edges=edges, densities=dens)
        result = mle_reconstruct(hist, povm, cfg)
        assert np.allclose(result.rho.entries, np.eye(4) / 4.0)
        assert not result.converged
        assert fidelity(result.rho, bell_state(1)) == pytest.approx(0.25, abs=1e-12)

    def test_vacuum_data_recovers_vacuum(self):
        cfg = MleConfig(cutoff=2, max_iterations=300, tolerance=1e-9, bin_width=0.4, x_range=4.0)
        edges = cfg.bin_edges()
        batches = {
            s: sample_batch(
                0.0, MeasurementSettings(*pair), 40_000, seed=400 + s
            )
            for s, pair in enumerate(PHASE_PAIRS_4)
        }
        hist = histogram_from_batches(batches, PHASE_PAIRS_4, edges)
        povm = build_povm_elements(PHASE_PAIRS_4, edges, cfg.cutoff)
        result = mle_reconstruct(hist, povm, cfg)
        assert np.diff(result.log_likelihood).min() >= -1e-10
        assert fidelity(result.rho, vacuum_state(2)) > 0.99

    def test_single_photon_data_recovers_entangled_state(self):
        cfg = MleConfig(cutoff=2, max_iterations=2000, tolerance=1e-10, bin_width=0.4, x_range=4.0)
        edges = cfg.bin_edges()
        batches = {
            s: sample_batch(
                0.0,
                MeasurementSettings(*pair),
                50_000,
                pipeline="ideal-fock",
                seed=500 + s,
                fock_n=1,
            )
            for s, pair in enumerate(PHASE_PAIRS_4)
        }
        hist = histogram_from_batches(batches, PHASE_PAIRS_4, edges)
        povm = build_povm_elements(PHASE_PAIRS_4, edges, cfg.cutoff)
        result = mle_reconstruct(hist, povm, cfg)
        assert np.diff(result.log_likelihood).min() >= -1e-10
        assert fidelity(result.rho, bell_state(2)) > 0.95
        assert multiphoton_mass(result.rho) < 0.05

    def test_mismatched_settings_rejected(self):
        cfg = MleConfig(cutoff=1, bin_width=0.5, x_range=2.0)
        edges = cfg.bin_edges()
        povm = build_povm_elements([(0.0, 0.0)], edges, 1)
        nb = len(edges) - 1
        hist = BinnedHistogram(
            phase_pairs=[(0.3, 0.0)],
            edges=edges,
            densities=np.full((1, nb, nb), 0.01),
        )
        with pytest.raises(ValueError):
            mle_reconstruct(hist, povm, cfg)


class TestFidelityAndMass:
    def test_pure_target_fidelity(self):
        target = bell_state(1)
        rho = np.outer(target.vector(), target.vector().conj())
        assert fidelity(TruncatedOperator(1, 2, rho), target) == pytest.approx(1.0)

    def test_orthogonal_state(self):
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 1.0  # |00>
        assert fidelity(TruncatedOperator(1, 2, rho), bell_state(1)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(TruncatedOperator(2, 2, np.eye(9) / 9.0), bell_state(1))

    def test_multiphoton_mass(self):
        d = 3
        rho = np.eye(d * d, dtype=complex) / (d * d)
        # Uniform diagonal: states with j + k > 2 are (1,2),(2,1),(2,2)
        assert multiphoton_mass(TruncatedOperator(2, 2, rho)) == pytest.approx(3.0 / 9.0)
        vac = np.zeros((d * d, d * d), dtype=complex)
        vac[0, 0] = 1.0
        assert multiphoton_mass(TruncatedOperator(2, 2, vac)) == 0.0


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        g = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        op = TruncatedOperator(2, 2, rho)
        path = str(tmp_path / "rho.txt")
        save_density_matrix(op, path)
        loaded = load_density_matrix(path, 2)
        assert np.array_equal(op.entries, loaded.entries)
