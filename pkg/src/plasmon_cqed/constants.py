"""Unit conventions.

Energies and rates are in meV with hbar = 1 inside every operator; time is in
fs and lengths in nm. A generator in meV becomes a rate in 1/fs after division
by ``HBAR_MEV_FS``.
"""

HBAR_MEV_FS = 658.2119569
C0_NM_PER_FS = 299.792458
MEV_PER_THZ = 4.135667696

# Cavity (1,0) mode of the 40 nm NPoM: 338.9 - 9.8i THz, ordinary frequency.
DEFAULT_OMEGA_CAV = 338.9 * MEV_PER_THZ
DEFAULT_KAPPA_OUT = 9.8 * MEV_PER_THZ
DEFAULT_MODE_VOLUME_RE = 60.01
DEFAULT_MODE_VOLUME_IM = 0.0
DEFAULT_EPSILON = 2.5**2
# Not tabulated in the source material; order of magnitude for a 40 nm NPoM.
DEFAULT_SIGMA_EXT = 1.0e4

# Cy5 molecule.
DEFAULT_DIPOLE_DEBYE = 10.1
DEFAULT_KAPPA_VIB = 25.0

DEFAULT_PHOTON_NUMBER = 1e-6
