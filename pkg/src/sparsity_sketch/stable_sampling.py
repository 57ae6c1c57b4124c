"""Symmetric stable variates (Cauchy and Gaussian) with reproducible seeding.

A symmetric stable law ``S_q(gamma)`` has characteristic function
``exp(-|gamma t|**q)``.  Only ``q = 1`` (Cauchy, half-width ``gamma``) and
``q = 2`` (Gaussian, parameterized here by its standard deviation ``gamma``)
are supported.

Randomness is addressed through :class:`RngStream`, a ``(seed, stream)`` pair
that maps onto a counter-based Philox generator.  Streams are hierarchical:
``RngStream(7).child(3).child(0)`` is a distinct, independent stream that can
be regenerated at any time from its address alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import ParameterError

__all__ = [
    "StableKind",
    "RngStream",
    "draw_stable_vector",
    "draw_stable_array",
    "stable_scale_of_projection",
]

_MASK64 = (1 << 64) - 1


class StableKind(enum.Enum):
    """Index ``q`` of a symmetric stable law."""

    CAUCHY = 1
    GAUSSIAN = 2

    @property
    def q(self) -> int:
        return self.value

    @classmethod
    def parse(cls, value: Union["StableKind", str, int]) -> "StableKind":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ParameterError(f"unknown stable kind {value!r}") from None
        return cls(value)


@dataclass(frozen=True)
class RngStream:
    """Address of an independent, reproducible random stream.

    Args:
        seed: 64-bit seed shared by an experiment.
        stream: stream id, or a tuple of ids for nested streams.

    Identical ``(seed, stream)`` pairs always yield identical variates.
    """

    seed: int
    stream: Tuple[int, ...] = ()

    def __post_init__(self):
        stream = self.stream
        if isinstance(stream, (int, np.integer)):
            stream = (int(stream),)
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream", tuple(int(s) & _MASK64 for s in stream))

    def child(self, *keys: int) -> "RngStream":
        """Return the sub-stream addressed by ``keys`` below this one."""
        return RngStream(self.seed, self.stream + tuple(keys))

    def generator(self) -> np.random.Generator:
        """Fresh numpy generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(seq))


def draw_stable_array(kind, gamma: float, shape, gen: np.random.Generator) -> np.ndarray:
    """Draw an array of i.i.d. ``S_q(gamma)`` variates from an open generator.

    Cauchy variates use the exact inverse CDF ``gamma * tan(pi (U - 1/2))``;
    Gaussian variates use numpy's exact ziggurat sampler scaled by ``gamma``.
    """
    kind = StableKind.parse(kind)
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if kind is StableKind.CAUCHY:
        u = gen.random(shape)
        return gamma * np.tan(np.pi * (u - 0.5))
    return gamma * gen.standard_normal(shape)


def draw_stable_vector(kind, gamma: float, p: int, rng: RngStream) -> np.ndarray:
    """Draw a length-``p`` vector with i.i.d. ``S_q(gamma)`` entries.

    Args:
        kind: :class:`StableKind` or its name.
        gamma: positive scale.
        p: vector length.
        rng: stream to read from (always read from its start).

    Returns:
        ndarray of shape ``(p,)``.
    """
    if int(p) != p or p < 1:
        raise ParameterError(f"p must be a positive integer, got {p}")
    return draw_stable_array(kind, gamma, int(p), rng.generator())


def stable_scale_of_projection(kind, gamma: float, x) -> float:
    """Scale of ``<a, x>`` when ``a`` has i.i.d. ``S_q(gamma)`` entries.

    The projection is ``S_q(gamma**q * ||x||_q**q)`` in the characteristic
    exponent; the returned value is its q-th root, ``gamma * ||x||_q``.
    """
    kind = StableKind.parse(kind)
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x.ravel(), ord=kind.q))
    if norm == 0.0:
        raise ParameterError("x must be non-zero")
    return gamma * norm
