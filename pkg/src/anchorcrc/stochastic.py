"""Seeded random streams with hierarchical keys.

Every stochastic computation in the package draws from a generator derived
from ``(root_seed, path)``. Paths are tuples of non-negative integers, e.g.
``(scenario, replicate)`` or ``(imputation,)``, so results never depend on
the order or the process in which work units are executed.

The bit generator is Philox (counter-based); keys are mixed through
``numpy.random.SeedSequence`` so neighbouring paths give unrelated streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SEED = 20240917

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedStream:
    root_seed: int = DEFAULT_SEED
    path: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "root_seed", int(self.root_seed) & _MASK64)
        object.__setattr__(self, "path", tuple(int(k) & _MASK64 for k in self.path))

    def child(self, *keys: int) -> "SeedStream":
        return SeedStream(self.root_seed, self.path + tuple(keys))

    def generator(self) -> np.random.Generator:
        """A fresh generator; identical streams always give identical draws."""
        seq = np.random.SeedSequence(self.root_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


def as_generator(source) -> np.random.Generator:
    """Accept a SeedStream, a Generator, or an integer seed."""
    if isinstance(source, np.random.Generator):
        return source
    if isinstance(source, SeedStream):
        return source.generator()
    if source is None:
        return SeedStream().generator()
    return SeedStream(int(source)).generator()


def gamma_draw(rng, shape, size=None) -> np.ndarray | float:
    """Gamma(shape, scale=1) variates.

    numpy implements the Marsaglia-Tsang squeeze method and handles
    shape < 1 with the ``U**(1/shape)`` boost, so Jeffreys shapes of 0.5 are
    sampled exactly.
    """
    shape = np.asarray(shape, dtype=float)
    if np.any(shape <= 0):
        raise ValueError("gamma shape must be positive")
    return as_generator(rng).standard_gamma(shape, size=size)


def dirichlet_draw(rng, concentrations, size: int | None = None) -> np.ndarray:
    """Dirichlet draws as normalised independent Gamma variates.

    With ``size`` given, returns an array of shape ``(size, k)``.
    """
    alpha = np.asarray(concentrations, dtype=float)
    if alpha.ndim != 1 or alpha.size < 2:
        raise ValueError("concentrations must be a vector of length >= 2")
    if np.any(alpha <= 0):
        raise ValueError("concentrations must be positive")
    gen = as_generator(rng)
    shape = alpha.shape if size is None else (size, alpha.size)
    g = gen.standard_gamma(np.broadcast_to(alpha, shape))
    total = g.sum(axis=-1, keepdims=True)
    # all-underflow rows (only possible for tiny concentrations) fall back to
    # the component that won the draw
    bad = total[..., 0] <= 0
    if np.any(bad):
        g = np.where(bad[..., None], alpha == alpha.max(), g).astype(float)
        total = g.sum(axis=-1, keepdims=True)
    return g / total


def beta_draw(rng, a: float, b: float, size: int | None = None):
    """Beta(a, b) via the length-2 Dirichlet construction."""
    draws = dirichlet_draw(rng, [a, b], size=size)
    return draws[..., 0]


def srs_without_replacement(rng, population_size: int, sample_size: int) -> np.ndarray:
    """Sorted indices of a simple random sample without replacement."""
    if population_size < 0 or not 0 <= sample_size <= population_size:
        raise ValueError(
            f"invalid sample size {sample_size} for population {population_size}"
        )
    gen = as_generator(rng)
    idx = gen.choice(population_size, size=sample_size, replace=False)
    return np.sort(idx)


def bernoulli(rng, p, size=None) -> np.ndarray:
    gen = as_generator(rng)
    p = np.asarray(p, dtype=float)
    if size is None:
        size = p.shape
    return gen.random(size) < p
