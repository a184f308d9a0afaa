"""Truncated-operator construction for a fluxonium coupled to harmonic modes.

All energies and frequencies are stored as value/h in GHz; external flux is
dimensionless (Phi_ext/Phi_0).  The fluxonium is represented in the
harmonic-oscillator basis of its LC mode, where the phase operator is
phi_zpf * (c + c^dag) and functions of the phase operator (cos, sin) are
evaluated by eigendecomposition, which is exact for the truncated operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

# Composite Hamiltonians are dense; refuse to build anything bigger than this.
MAX_COMPOSITE_DIM = 20_000


class ConfigError(ValueError):
    """Invalid physical or structural configuration."""


class ResourceError(RuntimeError):
    """Requested Hilbert space exceeds the configured memory budget."""


@dataclass(frozen=True)
class FluxoniumParams:
    """Fluxonium energies (value/h in GHz) and basis truncation."""

    e_j: float
    e_c: float
    e_l: float
    cutoff: int = 110

    def __post_init__(self):
        if self.e_j <= 0 or self.e_c <= 0 or self.e_l <= 0:
            raise ConfigError(
                f"fluxonium energies must be positive, got "
                f"e_j={self.e_j}, e_c={self.e_c}, e_l={self.e_l}"
            )
        if self.cutoff < 3:
            raise ConfigError(f"fluxonium cutoff must be >= 3, got {self.cutoff}")

    @property
    def phi_zpf(self) -> float:
        return (2.0 * self.e_c / self.e_l) ** 0.25

    @property
    def n_zpf(self) -> float:
        return 0.5 * (self.e_l / (2.0 * self.e_c)) ** 0.25


@dataclass(frozen=True)
class HarmonicModeParams:
    """A harmonic mode (readout resonator, cavity, or a higher cavity mode).

    ``coupling_to_qubit`` is the inductive coupling strength g (GHz) entering
    as -g * phi * (a + a^dag); ``coupling_to`` lists capacitive couplings
    (label, g) entering as g * (a^dag - a)(b^dag - b).
    """

    label: str
    frequency: float
    cutoff: int = 6
    coupling_to_qubit: float = 0.0
    coupling_to: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.frequency <= 0:
            raise ConfigError(f"mode {self.label!r}: frequency must be positive")
        if self.cutoff < 2:
            raise ConfigError(f"mode {self.label!r}: cutoff must be >= 2")
        if self.coupling_to_qubit < 0:
            raise ConfigError(f"mode {self.label!r}: coupling magnitude must be >= 0")
        for other, g in self.coupling_to:
            if g < 0:
                raise ConfigError(
                    f"mode {self.label!r}: coupling to {other!r} must be >= 0"
                )


@dataclass(frozen=True)
class CircuitParams:
    """Full circuit: fluxonium plus an ordered list of harmonic modes."""

    fluxonium: FluxoniumParams
    modes: tuple[HarmonicModeParams, ...]
    flux: float = 0.0

    def __post_init__(self):
        # allow passing a list
        object.__setattr__(self, "modes", tuple(self.modes))
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"mode labels must be unique, got {labels}")
        for m in self.modes:
            for other, _ in m.coupling_to:
                if other not in labels:
                    raise ConfigError(
                        f"mode {m.label!r} couples to unknown label {other!r}"
                    )

    def replace_flux(self, flux: float) -> "CircuitParams":
        return CircuitParams(self.fluxonium, self.modes, flux)

    @property
    def total_dim(self) -> int:
        d = self.fluxonium.cutoff
        for m in self.modes:
            d *= m.cutoff
        return d


def destroy(n: int) -> np.ndarray:
    """Annihilation operator truncated to an n-dimensional Fock space."""
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def build_fluxonium_operators(p: FluxoniumParams) -> tuple[np.ndarray, np.ndarray]:
    """Phase and charge operators in the LC harmonic basis.

    Returns (phase, charge) with phase = phi_zpf (c + c^dag) and
    charge = i n_zpf (c^dag - c).
    """
    c = destroy(p.cutoff)
    phase = p.phi_zpf * (c + c.T)
    charge = 1j * p.n_zpf * (c.T - c)
    return phase, charge


def operator_function(hermitian: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix via eigendecomposition."""
    vals, vecs = sla.eigh(hermitian)
    out = (vecs * fn(vals)) @ vecs.conj().T
    # phase operators are real symmetric; keep the result real in that case
    if np.isrealobj(hermitian):
        out = out.real
    return out


def build_fluxonium_hamiltonian(p: FluxoniumParams, flux: float) -> np.ndarray:
    """Bare fluxonium Hamiltonian at external flux Phi_ext/Phi_0 (GHz units).

    H = 4 E_C n^2 + (E_L/2)(phi + 2 pi flux)^2 - E_J cos(phi)
    """
    phase, charge = build_fluxonium_operators(p)
    eye = np.eye(p.cutoff)
    shifted = phase + 2.0 * np.pi * flux * eye
    h = (
        4.0 * p.e_c * (charge @ charge).real
        + 0.5 * p.e_l * (shifted @ shifted)
        - p.e_j * operator_function(phase, np.cos)
    )
    return 0.5 * (h + h.T)


def build_sin_half_phase(p: FluxoniumParams, offset: float = 0.0) -> np.ndarray:
    """sin(phi/2 + offset), evaluated through the phase eigendecomposition."""
    phase, _ = build_fluxonium_operators(p)
    return operator_function(phase, lambda x: np.sin(0.5 * x + offset))


def _embed(ops: dict[int, np.ndarray], dims: tuple[int, ...]) -> np.ndarray:
    """Kronecker-embed per-site operators into the full product space."""
    out = np.array([[1.0 + 0.0j]])
    for site, d in enumerate(dims):
        out = np.kron(out, ops.get(site, np.eye(d)))
    return out


@dataclass(frozen=True)
class CompositeHamiltonian:
    """Composite-system Hamiltonian in the bare product basis.

    The qubit factor is expressed in the eigenbasis of the bare fluxonium at
    the given flux (truncated to ``dims[0]`` levels), so basis index tuples
    coincide with bare occupation labels (n_qubit, n_mode1, ...).
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    qubit_energies: np.ndarray = field(repr=False)
    qubit_states: np.ndarray = field(repr=False, default=None)
    mode_labels: tuple[str, ...] = ()


def build_composite_hamiltonian(
    c: CircuitParams,
    qubit_levels: int | None = None,
    max_dim: int = MAX_COMPOSITE_DIM,
) -> CompositeHamiltonian:
    """Assemble the full Hamiltonian with all (non-RWA) coupling terms.

    ``qubit_levels`` truncates the fluxonium factor to its lowest bare
    eigenstates; None keeps the full cutoff (unitarily equivalent to the
    literal harmonic-basis tensor construction).
    """
    fp = c.fluxonium
    nq = fp.cutoff if qubit_levels is None else min(qubit_levels, fp.cutoff)
    if nq < 2:
        raise ConfigError(f"qubit_levels must be >= 2, got {nq}")
    dims = (nq,) + tuple(m.cutoff for m in c.modes)
    total = int(np.prod(dims))
    if total > max_dim:
        raise ResourceError(
            f"composite dimension {total} exceeds the limit {max_dim}; "
            "reduce cutoffs or qubit_levels"
        )

    hq = build_fluxonium_hamiltonian(fp, c.flux)
    evals, evecs = sla.eigh(hq)
    evals, evecs = evals[:nq], evecs[:, :nq]
    phase, _ = build_fluxonium_operators(fp)
    phase_q = evecs.T @ phase @ evecs  # phase operator in the qubit eigenbasis

    h = _embed({0: np.diag(evals).astype(complex)}, dims)
    label_to_site = {m.label: i + 1 for i, m in enumerate(c.modes)}
    mode_ops = {m.label: destroy(m.cutoff) for m in c.modes}

    for m in c.modes:
        site = label_to_site[m.label]
        a = mode_ops[m.label]
        h += m.frequency * _embed({site: a.T @ a}, dims)
        if m.coupling_to_qubit != 0.0:
            h += -m.coupling_to_qubit * _embed(
                {0: phase_q, site: a.T + a}, dims
            )
        for other, g in m.coupling_to:
            if g == 0.0:
                continue
            b = mode_ops[other]
            h += g * _embed(
                {site: a.T - a, label_to_site[other]: b.T - b}, dims
            )

    h = 0.5 * (h + h.conj().T)
    return CompositeHamiltonian(
        matrix=h,
        dims=dims,
        qubit_energies=evals,
        qubit_states=evecs,
        mode_labels=tuple(m.label for m in c.modes),
    )
