"""Qubit decay channels and T1-limit budgets versus flux.

Four channels: dielectric, inductive, quasiparticle, and Purcell (through the
readout resonator bath).  Rates follow the golden-rule form
Gamma = |<0|O|1>|^2 [S(w) + S(-w)] / hbar^2, with matrix elements taken
between dressed, flux-dependent states of the qubit-resonator system.

Unit bookkeeping: module inputs are value/h in GHz and temperatures in K;
spectral densities and rates are evaluated in SI internally, and all returned
rates are 1/s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.constants as const
from scipy.special import k0e

from .hilbert import (
    CircuitParams,
    ConfigError,
    FluxoniumParams,
    build_composite_hamiltonian,
    build_fluxonium_operators,
    build_sin_half_phase,
    destroy,
)
from .spectra import (
    EigenSolution,
    MissingLabelError,
    default_n_levels,
    diagonalize,
    label_dressed_states,
)

PHI0_REDUCED = const.hbar / (2.0 * const.e)  # reduced flux quantum, Wb
R_QUANTUM = const.h / const.e**2  # resistance quantum h/e^2, Ohm

ALL_CHANNELS = ("dielectric", "inductive", "quasiparticle", "purcell")


@dataclass(frozen=True)
class LossParams:
    """Bath parameters for the decay channels.

    ``q_diel`` is quoted at the anchor frequency (6 GHz by default) and scales
    as (anchor/|w|)^q_diel_exponent.  ``kappa_res`` is the total resonator
    linewidth kappa/2pi in kHz.  ``qp_phase_offset`` is the additive constant
    inside the quasiparticle operator sin(phi/2 + offset), in radians.
    ``purcell_literal_nth`` switches the emission factor to the literal
    n_th(-w01)+1 form (negative; for audit only) instead of n_th(w01)+1.
    """

    q_diel: float
    q_ind: float
    x_qp: float
    t_qubit: float
    t_res: float
    kappa_res: float
    t_c_al: float = 1.2
    q_diel_exponent: float = 0.7
    q_diel_anchor_ghz: float = 6.0
    qp_phase_offset: float = 0.5
    purcell_literal_nth: bool = False

    def __post_init__(self):
        for name in ("q_diel", "q_ind", "x_qp", "t_qubit", "t_res", "kappa_res", "t_c_al"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"loss parameter {name} must be positive")

    @property
    def gap_al(self) -> float:
        """Aluminum superconducting gap, J."""
        return 1.76 * const.k * self.t_c_al


@dataclass(frozen=True)
class ChannelRates:
    """Per-flux decay rates (1/s) and the T1 limits they imply (s)."""

    flux_grid: np.ndarray
    gamma_diel: np.ndarray
    gamma_ind: np.ndarray
    gamma_qp: np.ndarray
    gamma_purcell_up: np.ndarray
    gamma_purcell_down: np.ndarray
    channels: tuple[str, ...] = ALL_CHANNELS

    @property
    def gamma_purcell(self) -> np.ndarray:
        return self.gamma_purcell_up + self.gamma_purcell_down

    @property
    def gamma_total(self) -> np.ndarray:
        return self.gamma_diel + self.gamma_ind + self.gamma_qp + self.gamma_purcell

    def t1_channel(self, channel: str) -> np.ndarray:
        gamma = {
            "dielectric": self.gamma_diel,
            "inductive": self.gamma_ind,
            "quasiparticle": self.gamma_qp,
            "purcell": self.gamma_purcell,
        }[channel]
        with np.errstate(divide="ignore"):
            return np.where(gamma > 0, 1.0 / np.where(gamma > 0, gamma, 1.0), np.inf)

    @property
    def t1_total(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            g = self.gamma_total
            return np.where(g > 0, 1.0 / np.where(g > 0, g, 1.0), np.inf)


def _coth(x: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / np.tanh(x)


def golden_rule_rate(matrix_element: float, spectral_density_sum: float) -> float:
    """Gamma01 = |<0|O|1>|^2 [S(w)+S(-w)] / hbar^2.

    ``matrix_element`` carries its SI units (for flux-type operators, Wb);
    ``spectral_density_sum`` is S(w01)+S(-w01) in matching SI units.
    """
    if spectral_density_sum < 0:
        raise ValueError("spectral density sum must be nonnegative")
    return float(abs(matrix_element) ** 2 * spectral_density_sum / const.hbar**2)


def junction_capacitance(fp: FluxoniumParams) -> float:
    """C_J = e^2 / 2 E_C in farads."""
    return const.e**2 / (2.0 * const.h * fp.e_c * 1e9)


def superinductance(fp: FluxoniumParams) -> float:
    """L = phi0^2 / E_L in henries."""
    return PHI0_REDUCED**2 / (const.h * fp.e_l * 1e9)


def dielectric_density(omega01: float, p: LossParams, fp: FluxoniumParams) -> float:
    """S_VV(w01) + S_VV(-w01) for the voltage bath, SI (V^2 s).

    S sum = 2 hbar w^2 C_J / Q_diel(w) * coth(hbar|w| / 2 k_B T) with
    Q_diel(w) = Q_diel (2 pi anchor / |w|)^exponent.
    """
    if omega01 == 0:
        raise ValueError("omega01 must be nonzero")
    w = 2.0 * np.pi * omega01 * 1e9  # rad/s
    q = p.q_diel * (2.0 * np.pi * p.q_diel_anchor_ghz * 1e9 / abs(w)) ** p.q_diel_exponent
    c_j = junction_capacitance(fp)
    therm = _coth(const.hbar * abs(w) / (2.0 * const.k * p.t_qubit))
    return 2.0 * const.hbar * w**2 * c_j / q * therm


def inductive_density(omega01: float, p: LossParams, fp: FluxoniumParams) -> float:
    """S_II(w01) + S_II(-w01) for the current bath, SI (A^2 s)."""
    w = 2.0 * np.pi * omega01 * 1e9
    ind = superinductance(fp)
    therm = _coth(const.hbar * abs(w) / (2.0 * const.k * p.t_qubit))
    return const.hbar / (ind * p.q_ind) * therm


def _k0_sinh(x: float) -> float:
    # K0(x) sinh(x) without inf*0: k0e(x) = K0(x) e^x
    return float(k0e(x) * 0.5 * (1.0 - np.exp(-2.0 * x)))


def quasiparticle_density(omega01: float, p: LossParams, fp: FluxoniumParams) -> float:
    """S_qp(w01) + S_qp(-w01) from the junction quasiparticle admittance."""
    if omega01 <= 0:
        raise ValueError("omega01 must be positive")
    w = 2.0 * np.pi * omega01 * 1e9
    x = const.hbar * abs(w) / (2.0 * const.k * p.t_qubit)
    e_j = const.h * fp.e_j * 1e9
    re_y = (
        np.sqrt(2.0 / np.pi)
        * 8.0 * e_j / (R_QUANTUM * p.gap_al)
        * (2.0 * p.gap_al / (const.hbar * w)) ** 1.5
        * p.x_qp
        * np.sqrt(x)
        * _k0_sinh(x)
    )
    return 2.0 * const.hbar * w * re_y * _coth(x)


def thermal_occupation(omega01: float, temperature: float) -> float:
    """Bose occupation n_th at frequency omega01 (GHz) and temperature (K)."""
    return 1.0 / np.expm1(const.hbar * 2.0 * np.pi * omega01 * 1e9 / (const.k * temperature))


def purcell_rates(
    sol: EigenSolution, p: LossParams, omega_res: float
) -> tuple[float, float]:
    """Purcell absorption and emission rates (1/s) through the resonator bath.

    ``sol`` must be a labeled solution of the qubit (x) resonator system with
    dims (n_qubit, n_res).  Gamma_up = P(0) kappa n_th(w01) |<01|a^dag|00>|^2,
    Gamma_down = P(0) kappa [n_th(w01)+1] |<00|a|01>|^2, where |nm> is the
    dressed state labeled (qubit=n, resonator=m) and w01 is the dressed qubit
    transition.  ``omega_res`` is the bare resonator frequency in GHz.
    """
    if sol.dims is None or len(sol.dims) != 2:
        raise MissingLabelError("need a labeled qubit-resonator solution")
    for lab in ((0, 0), (1, 0), (0, 1)):
        idx = sol.labels.index(lab)
        if idx in sol.ambiguous:
            raise MissingLabelError(f"dressed state {lab} is ambiguously labeled")
    nq, nr = sol.dims
    a = np.kron(np.eye(nq), destroy(nr))
    v00 = sol.states[:, sol.labels.index((0, 0))]
    v10 = sol.states[:, sol.labels.index((1, 0))]  # qubit excited, no photon
    omega01 = sol.energy_of((1, 0)) - sol.energy_of((0, 0))
    # both elements vanish without qubit-resonator dressing
    m_up = v10.conj() @ (a.T @ v00)
    m_down = v00.conj() @ (a @ v10)
    kappa = 2.0 * np.pi * p.kappa_res * 1e3  # kHz -> rad/s
    hw_r = const.hbar * 2.0 * np.pi * omega_res * 1e9
    p0 = -np.expm1(-hw_r / (const.k * p.t_res))  # P(n=0)
    n_th = thermal_occupation(abs(omega01), p.t_res)
    up = p0 * kappa * n_th * abs(m_up) ** 2
    if p.purcell_literal_nth:
        emission_factor = thermal_occupation(-abs(omega01), p.t_res) + 1.0
    else:
        emission_factor = n_th + 1.0
    down = p0 * kappa * emission_factor * abs(m_down) ** 2
    return float(up), float(down)


def readout_mode(c: CircuitParams):
    """The mode acting as the Purcell bath: the first qubit-coupled mode."""
    return next((m for m in c.modes if m.coupling_to_qubit != 0), c.modes[0])


def t1_budget(
    c: CircuitParams,
    p: LossParams,
    grid,
    channels: tuple[str, ...] = ALL_CHANNELS,
    qubit_levels: int = 15,
) -> ChannelRates:
    """Per-channel decay rates and T1 limits over a flux grid.

    Dielectric and inductive channels couple through phi0 * phi, the
    quasiparticle channel through phi0 * sin(phi/2 + offset); all matrix
    elements are evaluated between the dressed |00> and |10> states of the
    qubit-resonator system at each flux point.
    """
    unknown = set(channels) - set(ALL_CHANNELS)
    if unknown:
        raise ConfigError(f"unknown channels: {sorted(unknown)}")
    if not channels:
        raise ConfigError("no channels enabled")
    grid = np.asarray(grid, dtype=float)
    fp = c.fluxonium
    phase, _ = build_fluxonium_operators(fp)
    sin_half = build_sin_half_phase(fp, p.qp_phase_offset)

    res = readout_mode(c)
    out = {name: np.zeros(len(grid)) for name in
           ("diel", "ind", "qp", "pup", "pdown")}
    for i, flux in enumerate(grid):
        try:
            sub = CircuitParams(fp, (res,), flux)
            comp = build_composite_hamiltonian(sub, qubit_levels=qubit_levels)
            sol = label_dressed_states(
                diagonalize(comp.matrix, default_n_levels(comp.dims)), comp.dims
            )
            nq, nr = sol.dims
            v00 = sol.states[:, sol.labels.index((0, 0))]
            v10 = sol.states[:, sol.labels.index((1, 0))]
            omega01 = sol.energy_of((1, 0)) - sol.energy_of((0, 0))

            # fluxonium operators projected onto the retained qubit eigenbasis
            phase_q = comp.qubit_states.T @ phase @ comp.qubit_states
            sin_q = comp.qubit_states.T @ sin_half @ comp.qubit_states
            phase_full = np.kron(phase_q, np.eye(nr))
            sin_full = np.kron(sin_q, np.eye(nr))
            m_phase = PHI0_REDUCED * (v00.conj() @ (phase_full @ v10))
            m_sin = PHI0_REDUCED * (v00.conj() @ (sin_full @ v10))

            if "dielectric" in channels:
                out["diel"][i] = golden_rule_rate(
                    m_phase, dielectric_density(omega01, p, fp)
                )
            if "inductive" in channels:
                out["ind"][i] = golden_rule_rate(
                    m_phase, inductive_density(omega01, p, fp)
                )
            if "quasiparticle" in channels:
                out["qp"][i] = golden_rule_rate(
                    m_sin, quasiparticle_density(omega01, p, fp)
                )
            if "purcell" in channels:
                out["pup"][i], out["pdown"][i] = purcell_rates(sol, p, res.frequency)
        except Exception as exc:
            raise RuntimeError(f"flux point {flux}: {exc}") from exc

    return ChannelRates(
        flux_grid=grid,
        gamma_diel=out["diel"],
        gamma_ind=out["ind"],
        gamma_qp=out["qp"],
        gamma_purcell_up=out["pup"],
        gamma_purcell_down=out["pdown"],
        channels=tuple(channels),
    )
