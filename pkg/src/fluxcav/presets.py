"""Reference device parameters for the measured fluxonium-resonator-cavity system."""

from .hilbert import CircuitParams, FluxoniumParams, HarmonicModeParams
from .loss import LossParams

E_J = 10.8
E_C = 3.5
E_L = 1.014
OMEGA_R = 6.8176
OMEGA_C = 4.535854
G_QR = 0.0252  # GHz
G_RC = 0.008   # GHz

# Direct qubit-cavity coupling, GHz.  The resonator-mediated interaction alone
# underpredicts both the observed 3 MHz qubit-cavity splitting and the tens-of-kHz
# cavity dispersive shifts by orders of magnitude; this value reproduces the
# 3 MHz splitting (effective coupling 1.5 MHz at the crossing).
G_QC_DIRECT = 0.0026

# higher cavity modes (GHz) and their resonator coupling
HIGHER_MODES = (13.375, 13.735, 13.734)
G_HIGHER = 0.016


def reference_fluxonium(cutoff: int = 110) -> FluxoniumParams:
    return FluxoniumParams(e_j=E_J, e_c=E_C, e_l=E_L, cutoff=cutoff)


def reference_circuit(
    flux: float = 0.0,
    cutoff: int = 110,
    mode_cutoff: int = 6,
    direct_cavity_coupling: float = G_QC_DIRECT,
    include_higher_modes: bool = False,
) -> CircuitParams:
    """Fluxonium + readout resonator + high-Q cavity at the fitted parameters."""
    modes = [
        HarmonicModeParams(
            label="R", frequency=OMEGA_R, cutoff=mode_cutoff,
            coupling_to_qubit=G_QR,
        ),
        HarmonicModeParams(
            label="C", frequency=OMEGA_C, cutoff=mode_cutoff,
            coupling_to_qubit=direct_cavity_coupling,
            coupling_to=(("R", G_RC),),
        ),
    ]
    if include_higher_modes:
        for i, freq in enumerate(HIGHER_MODES, start=1):
            modes.append(
                HarmonicModeParams(
                    label=f"C{i}", frequency=freq, cutoff=3,
                    coupling_to=(("R", G_HIGHER),),
                )
            )
    return CircuitParams(reference_fluxonium(cutoff), tuple(modes), flux)


def reference_loss() -> LossParams:
    return LossParams(
        q_diel=1.5e5,
        q_ind=3.0e7,
        x_qp=1.25e-6,
        t_qubit=0.045,
        t_res=0.050,
        kappa_res=922.0,
    )
