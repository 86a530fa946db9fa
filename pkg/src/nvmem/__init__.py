"""Simulation of an NV-center sensor with a nuclear-spin quantum memory.

Modules
-------
quantum       composite Hilbert spaces, operators and states
physics       Hamiltonian, couplings and dipolar geometry
dynamics      Lindblad channels, propagation and T2* estimation
sequences     correlation sequences and their simulation
filters       filter functions and noise-induced decay
spectroscopy  Ramsey spectra, Lorentzian fits and RF sweeps
optimizer     laser-power optimization and T2* scaling curves
"""

__version__ = "0.1.0"
