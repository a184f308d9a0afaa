"""Diagonalization, dressed-state labeling, flux sweeps, and dispersive shifts.

Sign convention for the dispersive shift: chi is the cross-Kerr combination
E(1_q,1_m) - E(1_q,0) - E(0,1_m) + E(0,0), so chi is negative when exciting
the qubit lowers the mode frequency.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .hilbert import CircuitParams, CompositeHamiltonian, build_composite_hamiltonian

HERMITICITY_RTOL = 1e-12
AMBIGUOUS_OVERLAP = 0.25

# default retained-state budget: every bare label with total excitation <= 4,
# plus nothing else (higher transitions such as f13 stay inside this set)
DEFAULT_MAX_EXCITATION = 4
DEFAULT_QUBIT_LEVELS = 15


class NonHermitianError(ValueError):
    """Input matrix violates the Hermiticity contract."""


class MissingLabelError(LookupError):
    """A requested dressed-state label is not present in the solution."""


class NoCrossingError(RuntimeError):
    """Branch separation is monotonic over the window; no avoided crossing."""


@dataclass(frozen=True)
class EigenSolution:
    """Lowest eigenpairs of a composite Hamiltonian, optionally labeled.

    ``labels[k]`` is the bare occupation tuple (n_qubit, n_mode1, ...) whose
    product state has the largest overlap with eigenvector k;
    ``overlap_quality[k]`` is that |overlap|^2.  ``ambiguous`` lists state
    indices whose best available overlap fell below 0.25.
    """

    energies: np.ndarray
    states: np.ndarray
    dims: tuple[int, ...] | None = None
    labels: tuple[tuple[int, ...], ...] | None = None
    overlap_quality: np.ndarray | None = None
    ambiguous: tuple[int, ...] = ()

    def energy_of(self, label: tuple[int, ...]) -> float:
        if self.labels is None:
            raise MissingLabelError("solution is unlabeled")
        try:
            return float(self.energies[self.labels.index(tuple(label))])
        except ValueError:
            raise MissingLabelError(f"label {tuple(label)} not found") from None


@dataclass(frozen=True)
class FluxSweep:
    flux_grid: np.ndarray
    solutions: tuple[EigenSolution, ...]


@dataclass(frozen=True)
class DispersiveCurve:
    flux_grid: np.ndarray
    chi: np.ndarray  # kHz
    zero_crossings: tuple[float, ...] = ()


def diagonalize(h: np.ndarray, n_levels: int) -> EigenSolution:
    """Lowest ``n_levels`` eigenpairs of a Hermitian matrix (unlabeled)."""
    scale = np.abs(h).max()
    if scale > 0 and np.abs(h - h.conj().T).max() > HERMITICITY_RTOL * scale:
        raise NonHermitianError("matrix is not Hermitian to within tolerance")
    n_levels = min(n_levels, h.shape[0])
    vals, vecs = sla.eigh(h, subset_by_index=(0, n_levels - 1))
    return EigenSolution(energies=vals, states=vecs)


def label_dressed_states(
    sol: EigenSolution, dims: tuple[int, ...]
) -> EigenSolution:
    """Assign bare occupation labels by greedy descending-overlap matching.

    The eigenvectors are expressed in the bare product basis, so overlaps are
    just squared component magnitudes.  Pairs (state, bare label) are visited
    in descending |overlap|^2; each state takes the best label still free.
    """
    n_states = sol.states.shape[1]
    overlap = np.abs(sol.states) ** 2  # (basis index, state)
    order = np.argsort(overlap, axis=None)[::-1]
    labels: dict[int, int] = {}
    taken: set[int] = set()
    for flat in order:
        basis, state = np.unravel_index(flat, overlap.shape)
        if state in labels or basis in taken:
            continue
        labels[int(state)] = int(basis)
        taken.add(int(basis))
        if len(labels) == n_states:
            break
    tuples = tuple(
        tuple(int(i) for i in np.unravel_index(labels[k], dims))
        for k in range(n_states)
    )
    quality = np.array([overlap[labels[k], k] for k in range(n_states)])
    ambiguous = tuple(int(k) for k in range(n_states) if quality[k] < AMBIGUOUS_OVERLAP)
    return replace(
        sol, dims=tuple(dims), labels=tuples, overlap_quality=quality,
        ambiguous=ambiguous,
    )


def transition_frequency(
    sol: EigenSolution, frm: tuple[int, ...], to: tuple[int, ...]
) -> float:
    """E(to) - E(frm) in GHz."""
    return sol.energy_of(to) - sol.energy_of(frm)


def dispersive_shift(
    sol: EigenSolution, mode_axis: int, qubit_axis: int = 0
) -> float:
    """Cross-Kerr shift chi between the qubit and one mode, in kHz."""
    if sol.dims is None or sol.labels is None:
        raise MissingLabelError("solution is unlabeled")
    n_axes = len(sol.dims)
    ground = (0,) * n_axes

    def one(axis):
        lab = [0] * n_axes
        lab[axis] = 1
        return tuple(lab)

    both = [0] * n_axes
    both[qubit_axis] = 1
    both[mode_axis] = 1
    chi_ghz = (
        sol.energy_of(tuple(both))
        - sol.energy_of(one(qubit_axis))
        - sol.energy_of(one(mode_axis))
        + sol.energy_of(ground)
    )
    return chi_ghz * 1e6


def default_n_levels(dims: tuple[int, ...], max_excitation: int = DEFAULT_MAX_EXCITATION) -> int:
    """Number of bare product states with total excitation <= max_excitation."""
    count = 0
    for idx in np.ndindex(*dims):
        if sum(idx) <= max_excitation:
            count += 1
    return count


def solve_circuit(
    c: CircuitParams,
    n_levels: int | None = None,
    qubit_levels: int = DEFAULT_QUBIT_LEVELS,
) -> EigenSolution:
    """Build, diagonalize, and label the composite system at c.flux."""
    comp = build_composite_hamiltonian(c, qubit_levels=qubit_levels)
    if n_levels is None:
        n_levels = default_n_levels(comp.dims)
    sol = diagonalize(comp.matrix, n_levels)
    return label_dressed_states(sol, comp.dims)


def _solve_point(args):
    c, flux, n_levels, qubit_levels = args
    try:
        return solve_circuit(c.replace_flux(flux), n_levels, qubit_levels)
    except Exception as exc:
        raise RuntimeError(f"flux point {flux}: {exc}") from exc


def sweep_flux(
    c: CircuitParams,
    grid,
    n_levels: int | None = None,
    qubit_levels: int = DEFAULT_QUBIT_LEVELS,
    jobs: int = 1,
) -> FluxSweep:
    """Labeled solutions over a flux grid; points are independent."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("flux grid is empty")
    work = [(c, f, n_levels, qubit_levels) for f in grid]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            sols = list(pool.map(_solve_point, work))
    else:
        sols = [_solve_point(w) for w in work]
    return FluxSweep(flux_grid=grid, solutions=tuple(sols))


def dispersive_curve(
    c: CircuitParams,
    grid,
    mode_label: str,
    qubit_levels: int = DEFAULT_QUBIT_LEVELS,
    refine_crossings: bool = True,
    jobs: int = 1,
) -> DispersiveCurve:
    """chi(flux) for one mode, with bisection-refined zero crossings."""
    mode_axis = 1 + [m.label for m in c.modes].index(mode_label)

    def chi_at(flux: float) -> float:
        sol = solve_circuit(c.replace_flux(flux), qubit_levels=qubit_levels)
        return dispersive_shift(sol, mode_axis)

    sweep = sweep_flux(c, grid, qubit_levels=qubit_levels, jobs=jobs)
    chi = np.array([dispersive_shift(s, mode_axis) for s in sweep.solutions])
    crossings = find_zero_crossings(
        sweep.flux_grid, chi, refine=chi_at if refine_crossings else None
    )
    return DispersiveCurve(flux_grid=sweep.flux_grid, chi=chi, zero_crossings=crossings)


def find_zero_crossings(
    flux_grid, chi, refine=None, tol_khz: float = 0.01, max_iter: int = 80
) -> tuple[float, ...]:
    """Roots of chi(flux) between sign-changing neighbors.

    With ``refine`` (a callable flux -> chi in kHz) each bracket is bisected
    on freshly computed chi until |chi| < tol_khz; interpolating chi near the
    root is avoided because chi is small there by construction.
    """
    flux_grid = np.asarray(flux_grid, dtype=float)
    chi = np.asarray(chi, dtype=float)
    roots = []
    for i in range(len(chi) - 1):
        if chi[i] == 0.0:
            roots.append(float(flux_grid[i]))
            continue
        if chi[i] * chi[i + 1] >= 0:
            continue
        lo, hi = float(flux_grid[i]), float(flux_grid[i + 1])
        f_lo = float(chi[i])
        if refine is None:
            # linear estimate from the bracketing samples
            roots.append(lo + (hi - lo) * f_lo / (f_lo - float(chi[i + 1])))
            continue
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            f_mid = refine(mid)
            if abs(f_mid) < tol_khz or hi - lo < 1e-12:
                break
            if f_lo * f_mid < 0:
                hi = mid
            else:
                lo, f_lo = mid, f_mid
        roots.append(0.5 * (lo + hi))
    return tuple(roots)


def _branch_separation(c, flux, label_a, label_b, qubit_levels):
    sol = solve_circuit(c.replace_flux(flux), qubit_levels=qubit_levels)
    return abs(sol.energy_of(label_a) - sol.energy_of(label_b))


def find_avoided_crossing(
    c: CircuitParams,
    window: tuple[float, float],
    branch_a: tuple[int, ...],
    branch_b: tuple[int, ...],
    n_scan: int = 31,
    qubit_levels: int = DEFAULT_QUBIT_LEVELS,
    tol_flux: float = 1e-6,
) -> tuple[float, float]:
    """Flux of minimal |E_a - E_b| in the window, and the gap in GHz.

    A coarse scan locates an interior minimum which is then refined by
    golden-section search, re-diagonalizing at every probe point.
    """
    lo, hi = window
    grid = np.linspace(lo, hi, n_scan)
    seps = np.array(
        [_branch_separation(c, f, branch_a, branch_b, qubit_levels) for f in grid]
    )
    k = int(np.argmin(seps))
    if k == 0 or k == len(grid) - 1:
        raise NoCrossingError(
            f"branch separation is monotonic over [{lo}, {hi}]; no interior minimum"
        )
    a, b = grid[k - 1], grid[k + 1]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1 = _branch_separation(c, x1, branch_a, branch_b, qubit_levels)
    f2 = _branch_separation(c, x2, branch_a, branch_b, qubit_levels)
    while b - a > tol_flux:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = _branch_separation(c, x1, branch_a, branch_b, qubit_levels)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = _branch_separation(c, x2, branch_a, branch_b, qubit_levels)
    flux_star = 0.5 * (a + b)
    gap = _branch_separation(c, flux_star, branch_a, branch_b, qubit_levels)
    return float(flux_star), float(gap)
