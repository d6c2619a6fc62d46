import numpy as np
import pytest

from gibbslab.fourier_field import PeriodicField, evaluate, default_grid_size


def random_field(cutoff: int, seed: int, scale: float = 1.0, decay: float = 1.0) -> PeriodicField:
    rng = np.random.default_rng(seed)
    ns = np.arange(-cutoff, cutoff + 1)
    c = rng.standard_normal(2 * cutoff + 1) + 1j * rng.standard_normal(2 * cutoff + 1)
    c = scale * c / (1.0 + np.abs(ns)) ** decay
    return PeriodicField(cutoff, c)


def bounded_below_field(cutoff: int, seed: int, floor: float = 0.3) -> PeriodicField:
    """Random field with |phi| bounded away from zero on the circle."""
    f = random_field(cutoff, seed, scale=0.5)
    vals = evaluate(f, default_grid_size(cutoff)).values
    lift = max(0.0, floor - np.abs(vals).min()) + floor
    c = np.array(f.coeffs)
    c[cutoff] += lift + 1.0
    return PeriodicField(cutoff, c)


def real_even_field(cutoff: int, seed: int, scale: float = 0.1) -> PeriodicField:
    """Real-valued pi-periodic potential for Hill tests."""
    rng = np.random.default_rng(seed)
    c = np.zeros(2 * cutoff + 1, dtype=complex)
    for n in range(2, cutoff + 1, 2):
        z = (rng.standard_normal() + 1j * rng.standard_normal()) * scale / n
        c[cutoff + n] = z
        c[cutoff - n] = np.conj(z)
    return PeriodicField(cutoff, c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
