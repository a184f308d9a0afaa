import numpy as np
import pytest

from fluxcav.fitting import (
    FD_REL_STEP,
    InsufficientDataError,
    NoPeakError,
    SpectroscopyTrace,
    finite_difference_jacobian,
    fit_couplings,
    fit_fluxonium_energies,
    fit_lorentzian,
    levenberg_marquardt,
    lorentzian,
    read_trace_csv,
    synthesize_spectroscopy,
    write_trace_csv,
)
from fluxcav.hilbert import CircuitParams, FluxoniumParams
from fluxcav.presets import reference_circuit
from fluxcav.spectra import solve_circuit

BARE = CircuitParams(FluxoniumParams(10.8, 3.5, 1.014, cutoff=60), (), 0.0)


class TestOptimizerCore:
    def test_jacobian_of_linear_function(self):
        a = np.array([[2.0, -1.0], [0.5, 3.0], [1.0, 1.0]])

        def fun(x):
            return a @ x - np.array([1.0, 2.0, 3.0])

        jac = finite_difference_jacobian(fun, [0.3, -0.7])
        assert np.allclose(jac, a, atol=1e-6)

    def test_quadratic_minimum(self):
        def fun(x):
            return np.array([x[0] - 3.0, 2.0 * (x[1] + 1.0)])

        x, cov, hist, it, converged = levenberg_marquardt(fun, [10.0, 10.0])
        assert converged
        assert np.allclose(x, [3.0, -1.0], atol=1e-8)

    def test_cost_history_non_increasing(self):
        rng = np.random.default_rng(0)
        t = np.linspace(0, 1, 50)
        y = 2.0 * np.exp(-3.0 * t) + rng.normal(0, 0.01, 50)

        def fun(x):
            return x[0] * np.exp(-x[1] * t) - y

        _, _, hist, _, _ = levenberg_marquardt(fun, [1.0, 1.0])
        assert all(b <= a for a, b in zip(hist, hist[1:]))

    def test_rel_step_constant(self):
        assert FD_REL_STEP == 1e-6


class TestTrace:
    def test_validation(self):
        with pytest.raises(ValueError):
            SpectroscopyTrace(np.array([1.0, 2.0]), np.array([0.0, 1.0]), 0.0)
        with pytest.raises(ValueError):
            SpectroscopyTrace(np.linspace(2, 1, 20), np.zeros(20), 0.0)

    def test_csv_round_trip(self):
        t = synthesize_spectroscopy(BARE, [0.25], width=0.002, seed=1)[0]
        t2 = read_trace_csv(write_trace_csv(t))
        assert np.array_equal(t2.frequency, t.frequency)
        assert np.array_equal(t2.response, t.response)
        assert t2.flux == t.flux

    def test_csv_missing_flux_rejected(self):
        with pytest.raises(ValueError, match="flux"):
            read_trace_csv("frequency,response\n1.0,0.5\n2.0,0.6\n")


class TestLorentzian:
    def test_noiseless_recovery(self):
        f = np.linspace(0.8, 0.94, 200)
        y = lorentzian(f, 0.866, 0.004, -0.7, 0.1)
        fit = fit_lorentzian(SpectroscopyTrace(f, y, -0.5))
        assert fit.center == pytest.approx(0.866, abs=1e-9)
        assert fit.width == pytest.approx(0.004, abs=1e-9)
        assert fit.amplitude == pytest.approx(-0.7, abs=1e-8)
        assert fit.offset == pytest.approx(0.1, abs=1e-9)

    def test_noisy_center_within_linewidth(self):
        t = synthesize_spectroscopy(BARE, [-0.5], width=0.002,
                                    noise_sigma=0.05, seed=2)[0]
        fit = fit_lorentzian(t)
        assert abs(fit.center - 0.86593) < 0.002

    def test_flat_trace_raises_no_peak(self):
        rng = np.random.default_rng(0)
        t = SpectroscopyTrace(np.linspace(1, 2, 100),
                              rng.normal(0.0, 0.2, 100), 0.0)
        with pytest.raises(NoPeakError):
            fit_lorentzian(t)

    def test_determinism(self):
        a = synthesize_spectroscopy(BARE, [0.0], noise_sigma=0.02, seed=5)[0]
        b = synthesize_spectroscopy(BARE, [0.0], noise_sigma=0.02, seed=5)[0]
        assert np.array_equal(a.response, b.response)


class TestEnergyFit:
    def make_points(self, noise=0.0, seed=0):
        import scipy.linalg as sla
        from fluxcav.hilbert import build_fluxonium_hamiltonian
        rng = np.random.default_rng(seed)
        pts = []
        for flux in (-0.5, -0.4, -0.3, -0.15, 0.0):
            v = sla.eigh(build_fluxonium_hamiltonian(BARE.fluxonium, flux),
                         eigvals_only=True, subset_by_index=(0, 2))
            pts.append((flux, "f01", v[1] - v[0] + rng.normal(0, noise)))
            pts.append((flux, "f12", v[2] - v[1] + rng.normal(0, noise)))
        return pts

    def test_noiseless_recovery(self):
        init = FluxoniumParams(10.0, 3.8, 0.95, cutoff=60)
        res = fit_fluxonium_energies(self.make_points(), init, cutoff=60)
        assert res.converged
        assert res.params["e_j"] == pytest.approx(10.8, abs=1e-6)
        assert res.params["e_c"] == pytest.approx(3.5, abs=1e-6)
        assert res.params["e_l"] == pytest.approx(1.014, abs=1e-6)

    def test_too_few_points_rejected(self):
        init = FluxoniumParams(10.0, 3.8, 0.95, cutoff=60)
        with pytest.raises(InsufficientDataError):
            fit_fluxonium_energies(self.make_points()[:2], init)

    def test_narrow_flux_span_rejected(self):
        init = FluxoniumParams(10.0, 3.8, 0.95, cutoff=60)
        pts = [(0.0, "f01", 13.66), (0.05, "f01", 13.5), (0.1, "f01", 13.2)]
        with pytest.raises(InsufficientDataError):
            fit_fluxonium_energies(pts, init)

    def test_unknown_label_rejected(self):
        init = FluxoniumParams(10.0, 3.8, 0.95, cutoff=60)
        pts = [(-0.5, "f03", 5.0), (0.0, "f01", 13.66), (-0.3, "f01", 6.8)]
        with pytest.raises(ValueError, match="f03"):
            fit_fluxonium_energies(pts, init)


class TestCouplingFit:
    def test_recovery_near_crossings(self):
        true = reference_circuit(cutoff=50, mode_cutoff=4)
        data = []
        for flux in (-0.305, -0.300, -0.295, -0.370, -0.3685, -0.367):
            sol = solve_circuit(true.replace_flux(flux), qubit_levels=8)
            for lab in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                data.append((flux, lab,
                             sol.energy_of(lab) - sol.energy_of((0, 0, 0))))
        res = fit_couplings(data, true.fluxonium, true, init=(0.022, 0.010),
                            qubit_levels=8)
        assert res.converged
        assert res.params["g_qr"] == pytest.approx(0.0252, rel=1e-3)
        assert res.params["g_rc"] == pytest.approx(0.008, rel=2e-2)

    def test_insufficient_data_rejected(self):
        true = reference_circuit(cutoff=50, mode_cutoff=4)
        with pytest.raises(InsufficientDataError):
            fit_couplings([], true.fluxonium, true, init=(0.02, 0.01))
