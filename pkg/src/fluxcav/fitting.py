"""Inverse problems: peak extraction and circuit-parameter recovery.

A small damped least-squares (Levenberg-Marquardt) core drives all fits so
the accepted-step cost is guaranteed non-increasing and the Jacobian policy
(central differences, relative step 1e-6) is uniform.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .hilbert import CircuitParams, FluxoniumParams, HarmonicModeParams, build_fluxonium_hamiltonian
import scipy.linalg as sla


FD_REL_STEP = 1e-6


class NoPeakError(RuntimeError):
    """Trace has no discernible resonance peak."""


class InsufficientDataError(ValueError):
    """Data set does not constrain the requested fit."""


@dataclass(frozen=True)
class SpectroscopyTrace:
    frequency: np.ndarray  # GHz, strictly increasing
    response: np.ndarray
    flux: float

    def __post_init__(self):
        f = np.asarray(self.frequency, dtype=float)
        r = np.asarray(self.response, dtype=float)
        if len(f) != len(r) or len(f) < 8:
            raise ValueError("trace needs >= 8 equal-length samples")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency axis must be strictly increasing")
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "response", r)


@dataclass(frozen=True)
class PeakFit:
    center: float  # GHz
    width: float   # FWHM, GHz
    amplitude: float
    offset: float
    center_err: float
    width_err: float
    amplitude_err: float
    offset_err: float


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    errors: dict[str, float]
    residual_rms: float
    covariance: np.ndarray = field(repr=False)
    iterations: int = 0
    converged: bool = False
    cost_history: tuple[float, ...] = field(default=(), repr=False)


def finite_difference_jacobian(fun, x, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """Central-difference Jacobian of a residual vector function."""
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(fun(x))
    jac = np.empty((len(r0), len(x)))
    for j in range(len(x)):
        h = rel_step * max(abs(x[j]), 1e-8)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h)
    return jac


def levenberg_marquardt(
    fun,
    x0,
    max_iter: int = 200,
    gtol: float = 1e-10,
    xtol: float = 1e-12,
    rel_step: float = FD_REL_STEP,
):
    """Minimize 0.5 ||fun(x)||^2 with accept/reject damping.

    Returns (x, covariance, cost_history, n_iter, converged).  The cost over
    accepted steps is non-increasing by construction.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fun(x))
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = 1e-3
    converged = False
    it = 0
    jac = finite_difference_jacobian(fun, x, rel_step)
    for it in range(1, max_iter + 1):
        g = jac.T @ r
        if np.linalg.norm(g, np.inf) < gtol:
            converged = True
            break
        jtj = jac.T @ jac
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-14), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        x_new = x + step
        r_new = np.asarray(fun(x_new))
        cost_new = 0.5 * float(r_new @ r_new)
        if cost_new <= cost:
            if abs(cost - cost_new) < xtol * max(cost, 1.0) or np.linalg.norm(step) < xtol * (
                np.linalg.norm(x) + xtol
            ):
                x, r, cost = x_new, r_new, cost_new
                history.append(cost)
                converged = True
                break
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            lam = max(lam / 3.0, 1e-12)
            jac = finite_difference_jacobian(fun, x, rel_step)
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    cov = _covariance(fun, x, r, rel_step)
    return x, cov, tuple(history), it, converged


def _covariance(fun, x, r, rel_step):
    jac = finite_difference_jacobian(fun, x, rel_step)
    m, n = jac.shape
    dof = max(m - n, 1)
    sigma2 = float(r @ r) / dof
    try:
        return sigma2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full((n, n), np.nan)


def lorentzian(f, center, width, amplitude, offset):
    half = 0.5 * width
    return offset + amplitude * half**2 / ((f - center) ** 2 + half**2)


def fit_lorentzian(t: SpectroscopyTrace, max_iter: int = 200) -> PeakFit:
    """Least-squares Lorentzian fit with extremum/half-max initialization."""
    f, y = t.frequency, t.response
    offset0 = float(np.median(y))
    i_ext = int(np.argmax(np.abs(y - offset0)))
    amp0 = float(y[i_ext] - offset0)
    noise = float(np.std(np.diff(y)) / np.sqrt(2.0))
    if abs(amp0) < max(3.0 * noise, 1e-12):
        raise NoPeakError("no discernible peak (amplitude below 3x noise)")
    center0 = float(f[i_ext])
    half_level = offset0 + 0.5 * amp0
    above = np.abs(y - offset0) >= abs(0.5 * amp0)
    idx = np.where(above)[0]
    if len(idx) >= 2:
        width0 = max(float(f[idx[-1]] - f[idx[0]]), float(np.mean(np.diff(f))))
    else:
        width0 = float(np.mean(np.diff(f)))

    def residual(p):
        return lorentzian(f, *p) - y

    x0 = [center0, width0, amp0, offset0]
    x, cov, hist, it, converged = levenberg_marquardt(residual, x0, max_iter=max_iter)
    if not converged:
        raise NoPeakError(f"Lorentzian fit did not converge in {max_iter} iterations")
    err = np.sqrt(np.abs(np.diag(cov)))
    return PeakFit(
        center=float(x[0]), width=abs(float(x[1])), amplitude=float(x[2]),
        offset=float(x[3]), center_err=float(err[0]), width_err=float(err[1]),
        amplitude_err=float(err[2]), offset_err=float(err[3]),
    )


def _bare_transitions(fp: FluxoniumParams, flux_values, n_levels: int = 3):
    """f01/f12 of the bare fluxonium at each flux, via dense diagonalization."""
    out = {}
    for flux in flux_values:
        vals = sla.eigh(
            build_fluxonium_hamiltonian(fp, flux), eigvals_only=True,
            subset_by_index=(0, n_levels - 1),
        )
        out[flux] = vals
    return out


def fit_fluxonium_energies(
    points,
    init: FluxoniumParams,
    max_iter: int = 500,
    cutoff: int | None = None,
) -> FitResult:
    """Recover (E_J, E_C, E_L) from (flux, transition, frequency) data.

    ``points`` is a list of (flux, label, frequency_ghz) with label in
    {"f01", "f12"}.  Fits the bare fluxonium model by damped least squares.
    """
    points = list(points)
    if len(points) < 3:
        raise InsufficientDataError("need at least 3 data points")
    fluxes = [p[0] for p in points]
    if max(fluxes) - min(fluxes) < 0.2:
        raise InsufficientDataError("data must span at least 0.2 in flux")
    for _, lab, _ in points:
        if lab not in ("f01", "f12"):
            raise ValueError(f"unknown transition label {lab!r}")
    cut = cutoff if cutoff is not None else init.cutoff
    flux_values = sorted(set(fluxes))

    def residual(x):
        fp = FluxoniumParams(e_j=x[0], e_c=x[1], e_l=x[2], cutoff=cut)
        levels = _bare_transitions(fp, flux_values)
        res = []
        for flux, lab, freq in points:
            v = levels[flux]
            model = v[1] - v[0] if lab == "f01" else v[2] - v[1]
            res.append(model - freq)
        return np.array(res)

    x0 = [init.e_j, init.e_c, init.e_l]
    x, cov, hist, it, converged = levenberg_marquardt(residual, x0, max_iter=max_iter)
    r = residual(x)
    names = ("e_j", "e_c", "e_l")
    err = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(
        params=dict(zip(names, map(float, x))),
        errors=dict(zip(names, map(float, err))),
        residual_rms=float(np.sqrt(np.mean(r**2))),
        covariance=cov,
        iterations=it,
        converged=converged,
        cost_history=hist,
    )


def fit_couplings(
    sweep_data,
    fitted: FluxoniumParams,
    circuit_template: CircuitParams,
    init: tuple[float, float],
    free: tuple[bool, bool] = (True, True),
    qubit_levels: int = 8,
    max_iter: int = 200,
) -> FitResult:
    """Recover (g_QR, g_RC) from branch frequencies near the avoided crossings.

    ``sweep_data`` is a list of (flux, branch_label, frequency_ghz) where
    branch_label is a bare occupation tuple, e.g. (0,1,0) for the
    resonator-like branch; frequencies are transitions from the ground state.
    The template circuit supplies mode frequencies and topology; the
    fluxonium energies come from ``fitted``.
    """
    from .spectra import solve_circuit

    sweep_data = list(sweep_data)
    if len(sweep_data) < 2:
        raise InsufficientDataError("need data bracketing the crossings")

    readout = circuit_template.modes[0].label

    def make_circuit(g_qr, g_rc, flux):
        # g_qr replaces the readout mode's qubit coupling; g_rc replaces every
        # capacitive coupling that involves the readout mode
        modes = []
        for m in circuit_template.modes:
            modes.append(HarmonicModeParams(
                label=m.label, frequency=m.frequency, cutoff=m.cutoff,
                coupling_to_qubit=g_qr if m.label == readout else m.coupling_to_qubit,
                coupling_to=tuple(
                    (other, g_rc if readout in (other, m.label) else g)
                    for other, g in m.coupling_to
                ),
            ))
        return CircuitParams(fitted, tuple(modes), flux)

    def residual(x):
        # spectra depend only on coupling magnitudes; fold the sign so trial
        # steps through zero remain valid circuits
        g_qr = abs(x[0]) if free[0] else init[0]
        g_rc = abs(x[-1]) if free[1] else init[1]
        res = []
        solved = {}
        for flux, label, freq in sweep_data:
            if flux not in solved:
                solved[flux] = solve_circuit(make_circuit(g_qr, g_rc, flux),
                                             qubit_levels=qubit_levels)
            sol = solved[flux]
            ground = (0,) * len(label)
            model = sol.energy_of(tuple(label)) - sol.energy_of(ground)
            res.append(model - freq)
        return np.array(res)

    x0 = [g for g, fr in zip(init, free) if fr]
    if not x0:
        raise InsufficientDataError("no free couplings to fit")
    x, cov, hist, it, converged = levenberg_marquardt(residual, x0, max_iter=max_iter)
    r = residual(x)
    names = [n for n, fr in zip(("g_qr", "g_rc"), free) if fr]
    err = np.sqrt(np.abs(np.diag(cov)))
    params = dict(zip(names, (abs(float(v)) for v in x)))
    return FitResult(
        params=params,
        errors=dict(zip(names, map(float, err))),
        residual_rms=float(np.sqrt(np.mean(r**2))),
        covariance=cov,
        iterations=it,
        converged=converged,
        cost_history=hist,
    )


def synthesize_spectroscopy(
    c: CircuitParams,
    grid,
    transition: str = "f01",
    width: float = 0.001,
    noise_sigma: float = 0.0,
    n_points: int = 200,
    span_widths: float = 30.0,
    seed: int = 0,
) -> list[SpectroscopyTrace]:
    """Lorentzian traces centered on model transition frequencies.

    Deterministic for a fixed seed; noise is additive Gaussian on the
    response.  The model is the bare fluxonium (f01/f12), matching the
    two-stage fitting workflow.
    """
    rng = np.random.default_rng(seed)
    fp = c.fluxonium
    traces = []
    for flux in grid:
        vals = sla.eigh(
            build_fluxonium_hamiltonian(fp, flux), eigvals_only=True,
            subset_by_index=(0, 2),
        )
        f0 = vals[1] - vals[0] if transition == "f01" else vals[2] - vals[1]
        f = np.linspace(f0 - span_widths * width, f0 + span_widths * width, n_points)
        y = lorentzian(f, f0, width, 1.0, 0.0)
        if noise_sigma > 0:
            y = y + rng.normal(0.0, noise_sigma, size=len(f))
        traces.append(SpectroscopyTrace(frequency=f, response=y, flux=float(flux)))
    return traces


def read_trace_csv(text: str) -> SpectroscopyTrace:
    """Parse a trace CSV with 'frequency,response' columns.

    The flux bias is carried in a '# flux = <value>' comment line.
    """
    flux = None
    rows = []
    for line in io.StringIO(text):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.lower().startswith("flux"):
                flux = float(body.split("=", 1)[1])
            continue
        rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    if [h.strip().lower() for h in header[:2]] != ["frequency", "response"]:
        raise ValueError("expected 'frequency,response' header")
    freq, resp = [], []
    for row in reader:
        freq.append(float(row[0]))
        resp.append(float(row[1]))
    if flux is None:
        raise ValueError("missing '# flux = <value>' line")
    return SpectroscopyTrace(frequency=np.array(freq), response=np.array(resp), flux=flux)


def write_trace_csv(t: SpectroscopyTrace) -> str:
    buf = io.StringIO()
    buf.write(f"# flux = {float(t.flux)!r}\n")
    buf.write("frequency,response\n")
    for f, y in zip(t.frequency, t.response):
        buf.write(f"{float(f)!r},{float(y)!r}\n")
    return buf.getvalue()
