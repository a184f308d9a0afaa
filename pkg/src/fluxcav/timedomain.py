"""Cavity rotating-frame analysis and characteristic-function lifetime fits.

Conventions: detunings and shifts (delta, kerr, chi) are linear frequencies
in kHz, times in microseconds.  The cavity coherent amplitude in the frame
rotating at the drive is alpha(t) = alpha0 exp(-i 2 pi delta t - t / 2 T1c).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fitting import FitResult, InsufficientDataError, levenberg_marquardt

# phase accumulated per (kHz * us): 2 pi * 1e3 Hz * 1e-6 s
PHASE_PER_KHZ_US = 2.0e-3 * np.pi


class SingularRegressionError(ValueError):
    """Regression abscissae are degenerate; the normal equations are singular."""


@dataclass(frozen=True)
class CavityDispersionModel:
    """Qubit-state-dependent cavity rotation parameters, all in kHz."""

    detuning: float      # Delta, bare drive-cavity detuning
    kerr: float          # K_C, cavity self-Kerr
    chi_qc: float        # qubit-state shift of the cavity
    chi_nl: float        # photon-number-dependent (nonlinear) part of chi

    def __post_init__(self):
        for name in ("detuning", "kerr", "chi_qc", "chi_nl"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class DecaySample:
    """One characteristic-function probe: C(beta) measured at time t (us)."""

    t: float
    beta: complex
    c_value: complex

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("time must be >= 0")


def rotation_frequencies(m: CavityDispersionModel, n_photons: float) -> tuple[float, float]:
    """Cavity rotation frequency (kHz) for qubit ground and excited states.

    Delta_g = Delta - 2 K_C n,  Delta_e = Delta - chi_QC - (2 K_C + 2 chi_nl) n.
    """
    if n_photons < 0:
        raise ValueError("photon number must be >= 0")
    delta_g = m.detuning - 2.0 * m.kerr * n_photons
    delta_e = m.detuning - m.chi_qc - (2.0 * m.kerr + 2.0 * m.chi_nl) * n_photons
    return delta_g, delta_e


def _ols_line(x, y):
    """Least-squares line fit: (intercept, slope, intercept_err, slope_err)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or len(np.unique(x)) < 2:
        raise SingularRegressionError("need at least 2 distinct abscissa values")
    design = np.column_stack([np.ones_like(x), x])
    coef, res, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 2:
        raise SingularRegressionError("degenerate regression design")
    dof = len(x) - 2
    if dof > 0:
        sigma2 = float(np.sum((design @ coef - y) ** 2)) / dof
        cov = sigma2 * np.linalg.inv(design.T @ design)
        errs = np.sqrt(np.diag(cov))
    else:
        errs = np.array([np.nan, np.nan])
    return float(coef[0]), float(coef[1]), float(errs[0]), float(errs[1])


def regress_dispersion(points_g, points_diff):
    """Recover the dispersion model from linear fits of the two data series.

    ``points_g`` holds (n, Delta_g) pairs and ``points_diff`` holds
    (n, Delta_e - Delta_g) pairs, with n the mean photon number.  Returns
    (CavityDispersionModel, errors dict); intercept/slope of the first series
    give Delta and -2 K_C, of the second give -chi_QC and -2 chi_nl.
    """
    ng = [p[0] for p in points_g]
    dg = [p[1] for p in points_g]
    nd = [p[0] for p in points_diff]
    dd = [p[1] for p in points_diff]
    b0_g, b1_g, e0_g, e1_g = _ols_line(ng, dg)
    b0_d, b1_d, e0_d, e1_d = _ols_line(nd, dd)
    model = CavityDispersionModel(
        detuning=b0_g,
        kerr=-0.5 * b1_g,
        chi_qc=-b0_d,
        chi_nl=-0.5 * b1_d,
    )
    errors = {
        "detuning": e0_g,
        "kerr": 0.5 * e1_g,
        "chi_qc": e0_d,
        "chi_nl": 0.5 * e1_d,
    }
    return model, errors


def coherent_decay(alpha0: complex, delta: float, t1c: float, t: float) -> complex:
    """alpha(t) = alpha0 exp(-i 2 pi delta t - t / 2 t1c); delta kHz, t/t1c us."""
    if t1c <= 0:
        raise ValueError("t1c must be positive")
    if t < 0:
        raise ValueError("time must be >= 0")
    return alpha0 * np.exp(-1j * PHASE_PER_KHZ_US * delta * t - t / (2.0 * t1c))


def characteristic_function(beta: complex, alpha: complex, literal: bool = False) -> complex:
    """C(beta) for a cavity coherent state alpha.

    Default: exp(-|beta|^2/4) * exp(-i Im(alpha conj(beta))), which is bounded
    by 1.  ``literal=True`` flips the envelope exponent sign (unnormalizable;
    provided only as an alternate convention).
    """
    env = 0.25 * abs(beta) ** 2
    if not literal:
        env = -env
    return np.exp(env) * np.exp(-1j * np.imag(alpha * np.conj(beta)))


def extract_imag_alpha(samples_at_t, v_max: float, n_scan: int = 1201) -> float:
    """Im(alpha) at one time from real-beta probes of C.

    For real beta, C(beta) = exp(-beta^2/4) exp(-i beta Im(alpha)), so the
    matched-filter correlation sum_beta exp(-beta^2/4) exp(+i beta v) C_meas
    peaks at v = Im(alpha).  A dense scan plus parabolic refinement avoids
    the phase-wrapping ambiguity of direct angle regression.
    """
    betas = np.array([np.real(s.beta) for s in samples_at_t])
    vals = np.array([s.c_value for s in samples_at_t])
    weights = np.exp(-0.25 * betas**2)
    grid = np.linspace(-v_max, v_max, n_scan)
    corr = np.real(
        np.exp(1j * np.outer(grid, betas)) @ (weights * vals)
    )
    k = int(np.argmax(corr))
    if 0 < k < n_scan - 1:
        # parabolic vertex through the three samples around the peak
        y0, y1, y2 = corr[k - 1], corr[k], corr[k + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom != 0:
            return float(grid[k] + 0.5 * (y0 - y2) / denom * (grid[1] - grid[0]))
    return float(grid[k])


def _initial_damped_sinusoid(times, im_alpha, t1c_init):
    """Coarse (amplitude, phase, omega, tau) for A e^{-t/2 tau} sin(th0 - w t).

    Scans omega (rad/us) over a dense grid and a few tau candidates; for each
    pair the in-phase/quadrature amplitudes are linear and solved exactly.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(im_alpha, dtype=float)
    span = times.max() - times.min()
    if span <= 0:
        raise InsufficientDataError("all samples at one time")
    # resolve up to ~half the sampling rate, down to a fraction of a cycle
    n_t = len(times)
    w_max = np.pi * n_t / span
    omegas = np.linspace(0.05 / span, w_max, 400)
    taus = [abs(t1c_init), span, 2.0 * span, 10.0 * span]
    best = (np.inf, 0.0, 0.0, 0.0, taus[0])
    for tau in taus:
        envelope = np.exp(-times / (2.0 * tau))
        for w in omegas:
            design = np.column_stack(
                [envelope * np.cos(w * times), envelope * np.sin(w * times)]
            )
            coef, *_ = np.linalg.lstsq(design, y, rcond=None)
            sse = float(np.sum((design @ coef - y) ** 2))
            if sse < best[0]:
                best = (sse, float(coef[0]), float(coef[1]), float(w), tau)
    _, p, q, w, tau = best
    # A sin(th0 - w t) = p cos(w t) + q sin(w t) with p = A sin th0, q = -A cos th0
    amp = float(np.hypot(p, q))
    theta0 = float(np.arctan2(p, -q))
    return amp, theta0, w, tau


def fit_cavity_lifetime(
    samples,
    alpha0_init: complex,
    delta_init: float,
    t1c_init: float = 200.0,
    literal: bool = False,
    max_iter: int = 500,
) -> FitResult:
    """Cavity lifetime and detuning from characteristic-function decay data.

    Stage one extracts Im(alpha) at each recorded time by matched-filter
    correlation over the real-beta probes and fits the resulting damped
    sinusoid coarsely.  Stage two refines (|alpha0|, arg alpha0, delta, t1c)
    globally against the complex samples by damped least squares.  With real
    beta the sign of delta is not identifiable (a twofold degeneracy with
    arg alpha0); the branch matching the sign of ``delta_init`` is reported.
    Requires samples at >= 4 distinct times.
    """
    samples = list(samples)
    times = sorted({float(s.t) for s in samples})
    if len(times) < 4:
        raise InsufficientDataError("need samples at >= 4 distinct times")

    data = np.array([s.c_value for s in samples])
    betas = np.array([s.beta for s in samples])
    tvec = np.array([s.t for s in samples], dtype=float)

    by_time: dict[float, list[DecaySample]] = {}
    for s in samples:
        by_time.setdefault(float(s.t), []).append(s)
    v_max = 1.5 * abs(alpha0_init) + 1.0
    im_alpha = [extract_imag_alpha(by_time[t], v_max) for t in times]
    amp, theta0, omega, tau = _initial_damped_sinusoid(times, im_alpha, t1c_init)
    delta0 = omega / PHASE_PER_KHZ_US
    if delta_init < 0:
        # pick the degenerate branch matching the initial sign of delta
        delta0, theta0 = -delta0, np.pi - theta0
    if amp < 1e-12:
        amp, theta0 = abs(alpha0_init), np.angle(alpha0_init)

    # optimize over the decay rate so zero decay is an interior point
    def model(x):
        a0 = x[0] * np.exp(1j * x[1])
        alpha = a0 * np.exp(
            -1j * PHASE_PER_KHZ_US * x[2] * tvec - 0.5 * x[3] * tvec
        )
        env = 0.25 * np.abs(betas) ** 2
        if not literal:
            env = -env
        return np.exp(env) * np.exp(-1j * np.imag(alpha * np.conj(betas)))

    def residual(x):
        r = model(x) - data
        return np.concatenate([r.real, r.imag])

    x0 = [amp, theta0, delta0, 1.0 / tau]
    x, cov, hist, it, converged = levenberg_marquardt(residual, x0, max_iter=max_iter)
    r = residual(x)
    names = ("alpha0_abs", "alpha0_phase", "delta", "decay_rate")
    err = np.sqrt(np.abs(np.diag(cov)))
    params = dict(zip(names, map(float, x)))
    errors = dict(zip(names, map(float, err)))
    rate = params["decay_rate"]
    params["t1c"] = 1.0 / rate if rate > 0 else np.inf
    errors["t1c"] = errors["decay_rate"] / rate**2 if rate > 0 else np.inf
    return FitResult(
        params=params,
        errors=errors,
        residual_rms=float(np.sqrt(np.mean(r**2))),
        covariance=cov,
        iterations=it,
        converged=converged,
        cost_history=hist,
    )


def synthesize_decay(
    alpha0: complex,
    delta: float,
    t1c: float,
    times,
    betas,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> list[DecaySample]:
    """Characteristic-function samples on a (time, beta) grid, optionally noisy."""
    rng = np.random.default_rng(seed)
    out = []
    for t in times:
        alpha = coherent_decay(alpha0, delta, t1c, t)
        for b in betas:
            c = characteristic_function(b, alpha)
            if noise_sigma > 0:
                c = c * (1.0 + rng.normal(0.0, noise_sigma)) + complex(
                    rng.normal(0.0, noise_sigma * 0.1), rng.normal(0.0, noise_sigma * 0.1)
                )
            out.append(DecaySample(t=float(t), beta=complex(b), c_value=complex(c)))
    return out
