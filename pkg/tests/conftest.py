import numpy as np
from hypothesis import settings

settings.register_profile("nvmem", deadline=None, max_examples=40)
settings.load_profile("nvmem")


def random_density(rng, d):
    """Random full-rank density matrix of dimension d."""
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)
