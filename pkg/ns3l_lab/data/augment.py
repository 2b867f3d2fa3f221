"""Gaussian input noise, the only augmentation applied to feature vectors."""
import numpy as np

from ns3l_lab.errors import DomainError


def augment(x: np.ndarray, rng: np.random.Generator, noise_sigma: float) -> np.ndarray:
    """Returns ``x`` plus i.i.d. N(0, sigma^2) noise; sigma 0 returns an exact copy."""
    if noise_sigma < 0.0:
        raise DomainError(f'noise sigma must be >= 0, got {noise_sigma}')
    x = np.asarray(x, dtype=np.float64)
    return x + rng.normal(0.0, noise_sigma, size=x.shape)
