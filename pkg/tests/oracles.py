"""Independent reference implementations used to cross-check the package.

The main oracle discretizes the fluxonium Hamiltonian on a real-space phase
grid with central differences, which shares no code or basis choice with the
harmonic-oscillator-basis construction in fluxcav.hilbert.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal


def phase_grid_levels(e_j, e_c, e_l, flux, n_levels=6, span=8 * np.pi,
                      n_points=4001, richardson=True):
    """Lowest fluxonium eigenvalues from a phase-space finite-difference grid.

    H = 4 E_C n^2 + (E_L/2)(phi + 2 pi flux)^2 - E_J cos(phi) with
    n -> -i d/dphi discretized by central differences on [-span, span].
    Richardson extrapolation (4 E_2N - E_N)/3 removes the leading O(h^2)
    discretization error.
    """
    def solve(npts):
        phi = np.linspace(-span, span, npts)
        h = phi[1] - phi[0]
        potential = 0.5 * e_l * (phi + 2 * np.pi * flux) ** 2 - e_j * np.cos(phi)
        diag = 8.0 * e_c / h**2 + potential
        off = np.full(npts - 1, -4.0 * e_c / h**2)
        return eigh_tridiagonal(diag, off, select="i",
                                select_range=(0, n_levels - 1))[0]

    if not richardson:
        return solve(n_points)
    e_n = solve(n_points)
    e_2n = solve(2 * n_points - 1)
    return (4.0 * e_2n - e_n) / 3.0


def perturbative_chi(energies, phi_matrix, omega_mode, g):
    """Second-order cross-Kerr shift chi for a multilevel qubit + mode, GHz.

    For coupling -g phi (a + a^dag), second-order perturbation theory gives
    chi = g^2 sum_j |phi_1j|^2 D(w_1j) - |phi_0j|^2 D(w_0j) with
    D(w) = 1/(w - wm) + 1/(w + wm).  Valid in the weak-coupling, far-detuned
    regime only; used as a 15%-level magnitude cross-check.
    """
    energies = np.asarray(energies)

    def shift(i):
        total = 0.0
        for j in range(len(energies)):
            if j == i:
                continue
            w_ij = energies[i] - energies[j]
            total += abs(phi_matrix[i, j]) ** 2 * (
                1.0 / (w_ij - omega_mode) + 1.0 / (w_ij + omega_mode)
            )
        return total

    return g**2 * (shift(1) - shift(0))
