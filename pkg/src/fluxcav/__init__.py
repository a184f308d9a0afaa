"""Fluxonium-cavity modeling: spectra, dispersive shifts, loss budgets, fitting."""

__version__ = "0.1.0"

from .hilbert import (
    CircuitParams,
    ConfigError,
    FluxoniumParams,
    HarmonicModeParams,
    build_composite_hamiltonian,
    build_fluxonium_hamiltonian,
    build_fluxonium_operators,
    build_sin_half_phase,
)
from .spectra import (
    DispersiveCurve,
    EigenSolution,
    FluxSweep,
    diagonalize,
    solve_circuit,
    dispersive_curve,
    dispersive_shift,
    find_avoided_crossing,
    find_zero_crossings,
    label_dressed_states,
    sweep_flux,
    transition_frequency,
)
from .loss import ChannelRates, LossParams, purcell_rates, t1_budget
from .presets import reference_circuit, reference_fluxonium, reference_loss
from .fitting import (
    FitResult,
    PeakFit,
    SpectroscopyTrace,
    fit_couplings,
    fit_fluxonium_energies,
    fit_lorentzian,
    synthesize_spectroscopy,
)
from .timedomain import (
    CavityDispersionModel,
    DecaySample,
    characteristic_function,
    coherent_decay,
    fit_cavity_lifetime,
    regress_dispersion,
    rotation_frequencies,
)
