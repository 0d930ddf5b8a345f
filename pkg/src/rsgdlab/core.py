"""Dense matrix helpers and labeled, reproducible random streams.

All numerical state in this package is float64 numpy arrays.  Randomness is
funneled through :class:`RngStream` so that every consumer (weight init, data
generation, shuffling, reinforcement coins) draws from its own independent
stream derived from one experiment seed.  Two runs that share a seed therefore
share initial weights and data order even when one of them draws extra
reinforcement coins.
"""

from __future__ import annotations

import zlib

import numpy as np

Matrix = np.ndarray


class ShapeError(ValueError):
    """Raised when matrix operands have incompatible shapes."""


def _stream_key(stream_id: str) -> int:
    # crc32 is stable across platforms and Python versions (unlike hash()).
    return zlib.crc32(stream_id.encode("utf-8"))


class RngStream:
    """Deterministic random stream labeled by purpose.

    Same (seed, stream_id) always reproduces the same draw sequence; distinct
    stream_ids from one seed are statistically independent (PCG64 seeded via
    SeedSequence spawn keys).  A stream is single-owner: never draw from one
    stream concurrently.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = int(seed)
        self.stream_id = stream_id
        ss = np.random.SeedSequence(self.seed, spawn_key=(_stream_key(stream_id),))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id!r})"

    def normal(self, rows: int, cols: int, mean: float = 0.0, std: float = 1.0) -> Matrix:
        if std < 0:
            raise ValueError(f"std must be >= 0, got {std}")
        return mean + std * self._gen.standard_normal((rows, cols))

    def uniform(self, shape) -> Matrix:
        return self._gen.random(shape)

    def bernoulli(self, p: float) -> bool:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {p}")
        return bool(self._gen.random() < p)

    def bernoulli_matrix(self, p: float, shape) -> np.ndarray:
        """One coin per component, drawn in row-major order."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {p}")
        return self._gen.random(shape) < p

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} x {b.shape}")
    return a @ b


def hadamard(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise ShapeError(f"element-wise product needs equal shapes, got {a.shape} vs {b.shape}")
    return a * b


def gaussian_matrix(rows: int, cols: int, mean: float, std: float, rng: RngStream) -> Matrix:
    return rng.normal(rows, cols, mean=mean, std=std)


def bernoulli(p: float, rng: RngStream) -> bool:
    return rng.bernoulli(p)
