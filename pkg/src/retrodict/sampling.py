"""Seeded random sampling: Haar unitaries, pure states and random positive operators.

Streams are Philox (counter-based) generators.  ``make_rng(seed, *key)`` derives
an independent substream for every ``key`` tuple from the same master seed, so
work split into chunks gives identical results regardless of scheduling.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _ginibre(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_unitary(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Gaussian matrix.

    ``Q`` is multiplied by ``diag(R_aa / |R_aa|)`` so the result is Haar
    distributed and not biased by the QR sign convention.  With ``size`` a stack
    of ``size`` unitaries is returned.
    """
    if dim < 1:
        raise ValueError("dimension must be positive")
    shape = (dim, dim) if size is None else (size, dim, dim)
    q, r = np.linalg.qr(_ginibre(rng, shape))
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phases = diag / np.abs(diag)
    return q * phases[..., None, :]


def haar_state(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random pure state ``U|a>`` for a Haar unitary and a random basis index."""
    n = 1 if size is None else size
    u = haar_unitary(dim, rng, n)
    a = rng.integers(0, dim, size=n)
    out = u[np.arange(n), :, a]
    return out[0] if size is None else out


def haar_pure_past(d_a: int, k: int, rng: np.random.Generator, size: int | None = None):
    """Haar-random pure state and pure effect on C^d_a x C^k (flattened vectors)."""
    if k < 1 or d_a < 1:
        raise ValueError("dimensions must be positive")
    psi = haar_state(d_a * k, rng, size)
    e = haar_state(d_a * k, rng, size)
    return psi, e


def random_density(dim: int, rng: np.random.Generator, env: int | None = None) -> np.ndarray:
    """Mixed state induced by tracing out a Haar pure state on C^dim x C^env."""
    env = dim if env is None else env
    v = haar_state(dim * env, rng).reshape(dim, env)
    return v @ v.conj().T


def random_separable(d_a: int, d_b: int, rng: np.random.Generator, terms: int = 4) -> np.ndarray:
    """Convex mixture of products of random mixed states."""
    w = rng.dirichlet(np.ones(terms))
    return sum(
        wi * np.kron(random_density(d_a, rng), random_density(d_b, rng)) for wi in w
    )
