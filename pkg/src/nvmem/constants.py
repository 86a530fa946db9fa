"""Physical constants and default model parameters.

Gyromagnetic ratios are stored as gamma / 2pi in Hz/T and enter the
Hamiltonian as written, so a positive value puts the +I_z level higher in
energy. Sources are listed in the README constants table.
"""

import scipy.constants as sc

#: Vacuum permeability over 4 pi, T^2 m^3 / J.
MU0_OVER_4PI = sc.mu_0 / (4 * sc.pi)
#: Planck constant, J s.
PLANCK = sc.h

#: Electron gyromagnetic ratio / 2pi (CODATA, magnitude), Hz/T.
GAMMA_ELECTRON = sc.physical_constants["electron gyromag. ratio in MHz/T"][0] * 1e6
#: Proton gyromagnetic ratio / 2pi (CODATA), Hz/T.
GAMMA_H1 = sc.physical_constants["proton gyromag. ratio in MHz/T"][0] * 1e6
#: 13C gyromagnetic ratio / 2pi, Hz/T.
GAMMA_C13 = 10.7084e6
#: 29Si gyromagnetic ratio / 2pi (negative moment), Hz/T.
GAMMA_SI29 = -8.465e6
#: 19F gyromagnetic ratio / 2pi, Hz/T.
GAMMA_F19 = 40.078e6
#: 14N gyromagnetic ratio / 2pi, Hz/T.
GAMMA_N14 = 3.077e6

#: Ground-state zero-field splitting of NV-, Hz.
ZFS_NV = 2.87e9
#: Default bias field, T (puts 13C near 16.37 MHz).
B_FIELD = 1.529
#: Longitudinal hyperfine coupling of the 14N memory, Hz.
A_PAR_MEMORY = -2.16e6

#: Sensor longitudinal relaxation time in the dark, s.
T1_SENSOR = 6.4e-3
#: NV0 electron spin lifetime, s.
T1_NV0 = 13e-6
#: Laser power to excitation rate, 1/(s uW).
C_EXC = 2.5e5
#: Ionization rate per squared excitation rate, s.
C_ION = 1 / 7e8
#: Probability to decay from the metastable level into m_S = 0.
P_BRANCHING = 0.96
#: Metastable decay rate, 1/s. Chosen far above the excitation rates used.
METASTABLE_RATE = 1e8
#: Excitation rate out of m_S = 0 relative to m_S = +-1. Set so that the
#: optically pumped steady state has 98 % population in m_S = 0.
MS0_EXCITATION_RATIO = 0.49
#: Probability that NV0 -> NV- recovery leaves a usable sensor.
RECOVERY_FIDELITY = 0.7

#: Sensor level indices of the spin-1 triplet, ordered m_S = +1, 0, -1.
LEVEL_PLUS, LEVEL_ZERO, LEVEL_MINUS = 0, 1, 2
#: Auxiliary levels of the illuminated sensor.
LEVEL_METASTABLE, LEVEL_IONIZED = 3, 4
