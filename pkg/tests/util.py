"""Shared helpers for the test suite."""

import numpy as np


def random_complex(gen, *shape):
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


def random_hpd(gen, p, jitter=0.5):
    """Random Hermitian positive definite p x p matrix."""
    a = random_complex(gen, p, p)
    return a @ a.conj().T + jitter * np.eye(p)


def random_unitary(gen, p):
    q, r = np.linalg.qr(random_complex(gen, p, p))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def mc_se(values):
    """Standard error of the mean of a 1-D sample."""
    values = np.asarray(values, dtype=float)
    return values.std(ddof=1) / np.sqrt(values.size)
