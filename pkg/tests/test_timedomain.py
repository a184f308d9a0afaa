import numpy as np
import pytest

from fluxcav.fitting import InsufficientDataError
from fluxcav.timedomain import (
    CavityDispersionModel,
    DecaySample,
    SingularRegressionError,
    characteristic_function,
    coherent_decay,
    extract_imag_alpha,
    fit_cavity_lifetime,
    regress_dispersion,
    rotation_frequencies,
    synthesize_decay,
)

MODEL = CavityDispersionModel(detuning=-24.21, kerr=0.5, chi_qc=-15.6, chi_nl=-0.3)


class TestRotationFrequencies:
    def test_zero_photon_limit(self):
        dg, de = rotation_frequencies(MODEL, 0.0)
        assert dg == pytest.approx(-24.21)
        assert de == pytest.approx(-24.21 - (-15.6))
        assert de - dg == pytest.approx(15.6)

    def test_difference_linear_in_n(self):
        ns = np.linspace(0, 10, 9)
        diffs = [rotation_frequencies(MODEL, n)[1]
                 - rotation_frequencies(MODEL, n)[0] for n in ns]
        slopes = np.diff(diffs) / np.diff(ns)
        assert np.allclose(slopes, -2.0 * MODEL.chi_nl, atol=1e-12)

    def test_negative_photon_number_rejected(self):
        with pytest.raises(ValueError):
            rotation_frequencies(MODEL, -1.0)

    def test_non_finite_model_rejected(self):
        with pytest.raises(ValueError):
            CavityDispersionModel(detuning=np.nan, kerr=0, chi_qc=0, chi_nl=0)


class TestRegression:
    def make_series(self, noise=0.0, seed=0):
        rng = np.random.default_rng(seed)
        ns = np.linspace(0.5, 8, 12)
        pg, pd = [], []
        for n in ns:
            dg, de = rotation_frequencies(MODEL, n)
            pg.append((n, dg + rng.normal(0, noise)))
            pd.append((n, de - dg + rng.normal(0, noise)))
        return pg, pd

    def test_noiseless_round_trip_exact(self):
        pg, pd = self.make_series()
        m, err = regress_dispersion(pg, pd)
        assert m.detuning == pytest.approx(MODEL.detuning, abs=1e-10)
        assert m.kerr == pytest.approx(MODEL.kerr, abs=1e-10)
        assert m.chi_qc == pytest.approx(MODEL.chi_qc, abs=1e-10)
        assert m.chi_nl == pytest.approx(MODEL.chi_nl, abs=1e-10)

    def test_noisy_recovery_within_errors(self):
        pg, pd = self.make_series(noise=0.05, seed=1)
        m, err = regress_dispersion(pg, pd)
        assert abs(m.detuning - MODEL.detuning) < 5 * err["detuning"]
        assert abs(m.chi_qc - MODEL.chi_qc) < 5 * err["chi_qc"]

    def test_degenerate_abscissae_rejected(self):
        pts = [(1.0, -24.0), (1.0, -25.0), (1.0, -26.0)]
        with pytest.raises(SingularRegressionError):
            regress_dispersion(pts, pts)

    def test_photon_number_calibration(self):
        # voltage^2 axis with unknown conversion c: slope of (de - dg) vs V^2
        # equals -2 chi_nl c, so c is recovered given chi_nl
        c_true = 3.7
        v2 = np.linspace(0.2, 2.0, 10)
        pd = [(v, rotation_frequencies(MODEL, c_true * v)[1]
               - rotation_frequencies(MODEL, c_true * v)[0]) for v in v2]
        m, _ = regress_dispersion(pd, pd)
        # chi_nl fitted against V^2 is chi_nl * c_true
        assert m.chi_nl / MODEL.chi_nl == pytest.approx(c_true, rel=1e-10)


class TestCoherentDecay:
    def test_t_zero_identity(self):
        assert coherent_decay(1.3 - 0.2j, -24.21, 210.0, 0.0) == 1.3 - 0.2j

    def test_amplitude_at_one_lifetime(self):
        a = coherent_decay(2.0, -24.21, 210.0, 210.0)
        assert abs(a) == pytest.approx(2.0 * np.exp(-0.5), abs=1e-12)
        assert abs(a) == pytest.approx(1.2131, abs=1e-4)

    def test_semigroup_property(self):
        a0 = 1.0 + 1.0j
        step = coherent_decay(coherent_decay(a0, -24.21, 210.0, 50.0),
                              -24.21, 210.0, 70.0)
        direct = coherent_decay(a0, -24.21, 210.0, 120.0)
        assert step == pytest.approx(direct, abs=1e-14)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            coherent_decay(1.0, 0.0, -5.0, 1.0)
        with pytest.raises(ValueError):
            coherent_decay(1.0, 0.0, 5.0, -1.0)


class TestCharacteristicFunction:
    def test_beta_zero(self):
        assert characteristic_function(0.0, 3.0 + 1.0j) == 1.0

    def test_real_alpha_real_beta_envelope_only(self):
        val = characteristic_function(1.2, 0.7)
        assert val == pytest.approx(np.exp(-0.25 * 1.44), abs=1e-14)

    def test_direct_evaluation(self):
        val = characteristic_function(1.0, 1j)
        assert val == pytest.approx(np.exp(-0.25) * np.exp(-1j), abs=1e-14)

    def test_bounded_by_one_default(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            b = complex(*rng.normal(0, 2, 2))
            a = complex(*rng.normal(0, 2, 2))
            assert abs(characteristic_function(b, a)) <= 1.0 + 1e-12

    def test_literal_convention_unbounded(self):
        assert abs(characteristic_function(2.0, 0.0, literal=True)) > 1.0


class TestLifetimeFit:
    TIMES = np.linspace(0, 400, 20)
    BETAS = np.linspace(0.3, 2.5, 15)

    def test_extract_imag_alpha(self):
        alpha = 0.9 - 1.4j
        samples = [DecaySample(0.0, b, characteristic_function(b, alpha))
                   for b in self.BETAS]
        assert extract_imag_alpha(samples, 3.0) == pytest.approx(-1.4, abs=1e-3)

    def test_noiseless_recovery(self):
        samples = synthesize_decay(2.0 * np.exp(0.4j), -24.21, 210.0,
                                   self.TIMES, self.BETAS)
        res = fit_cavity_lifetime(samples, 1.8 * np.exp(0.3j), -20.0,
                                  t1c_init=150.0)
        assert res.converged
        assert res.params["t1c"] == pytest.approx(210.0, rel=0.01)
        assert res.params["delta"] == pytest.approx(-24.21, rel=1e-4)

    def test_zero_decay_rate_consistent_with_zero(self):
        samples = synthesize_decay(2.0, -24.21, 1e12, self.TIMES, self.BETAS,
                                   noise_sigma=0.01, seed=5)
        res = fit_cavity_lifetime(samples, 1.8, -20.0, t1c_init=500.0)
        assert abs(res.params["decay_rate"]) < 2.0 * res.errors["decay_rate"]

    def test_global_phase_invariance(self):
        phi = 0.7
        base = synthesize_decay(2.0 * np.exp(0.4j), -24.21, 210.0,
                                self.TIMES, self.BETAS)
        rotated = synthesize_decay(2.0 * np.exp((0.4 + phi) * 1j), -24.21,
                                   210.0, self.TIMES,
                                   self.BETAS * np.exp(1j * phi))
        r1 = fit_cavity_lifetime(base, 1.8 * np.exp(0.3j), -20.0, 150.0)
        r2 = fit_cavity_lifetime(rotated, 1.8 * np.exp((0.3 + phi) * 1j),
                                 -20.0, 150.0)
        assert r2.params["t1c"] == pytest.approx(r1.params["t1c"], rel=1e-6)
        assert r2.params["delta"] == pytest.approx(r1.params["delta"], rel=1e-6)

    def test_too_few_times_rejected(self):
        samples = synthesize_decay(2.0, -24.21, 210.0, [0.0, 10.0, 20.0],
                                   self.BETAS)
        with pytest.raises(InsufficientDataError):
            fit_cavity_lifetime(samples, 2.0, -24.0)

    def test_monte_carlo_noise_robustness(self):
        errs = []
        for seed in range(50):
            samples = synthesize_decay(2.0 * np.exp(0.4j), -24.21, 210.0,
                                       self.TIMES, self.BETAS,
                                       noise_sigma=0.05, seed=seed)
            res = fit_cavity_lifetime(samples, 1.8 * np.exp(0.3j), -20.0,
                                      t1c_init=150.0)
            errs.append(abs(res.params["t1c"] - 210.0) / 210.0)
        assert np.median(errs) < 0.15
