"""Linear measurement operators ``R^p -> R^n``.

Two realizations share one small interface (``shape``, ``matvec``,
``rmatvec``, ``gram``, ``to_dense``):

* :class:`ExplicitOperator` wraps a dense array.
* :class:`StreamedOperator` is described only by its generating stream.  Its
  entries are i.i.d. stable variates laid out in column blocks; block ``c`` is
  drawn from ``rng.child(c)``, so any block can be regenerated on demand and
  blocks are never stored.

:class:`StackedOperator` concatenates row groups, which is how a recovery
reuses the preliminary Gaussian rows and appends fresh ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError
from .stable_sampling import RngStream, StableKind, draw_stable_array

__all__ = [
    "ExplicitOperator",
    "StreamedOperator",
    "StackedOperator",
    "as_operator",
    "default_block_cols",
]

# Entries per generated block; bounds transient memory to ~8 MB.
BLOCK_ENTRIES = 1 << 20


def default_block_cols(n: int, p: int) -> int:
    return max(1, min(int(p), BLOCK_ENTRIES // max(int(n), 1)))


class _OperatorMixin:
    @property
    def n(self) -> int:
        return self.shape[0]

    @property
    def p(self) -> int:
        return self.shape[1]

    def __matmul__(self, v):
        return self.matvec(v)

    @property
    def nbytes_dense(self) -> int:
        return 8 * self.shape[0] * self.shape[1]

    def fro_norm(self) -> float:
        return float(np.sqrt(np.trace(self.gram())))


@dataclass(eq=False)
class ExplicitOperator(_OperatorMixin):
    """Dense matrix operator."""

    matrix: np.ndarray
    kind: str = "explicit"
    gamma: float = 1.0

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def matvec(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def rmatvec(self, w) -> np.ndarray:
        return self.matrix.T @ np.asarray(w, dtype=float)

    def gram(self) -> np.ndarray:
        return self.matrix @ self.matrix.T

    def to_dense(self) -> np.ndarray:
        return self.matrix

    def fro_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


@dataclass(eq=False)
class StreamedOperator(_OperatorMixin):
    """Seed-described ``n x p`` matrix with i.i.d. ``S_q(gamma)`` entries.

    Args:
        kind: stable law of the entries.
        n_rows: number of rows.
        p: number of columns.
        gamma: scale of the entries.
        rng: stream address; column block ``c`` comes from ``rng.child(c)``.
        block_cols: columns per block (defaults to ``default_block_cols``).
    """

    kind: StableKind
    n_rows: int
    p_cols: int
    gamma: float
    rng: RngStream
    block_cols: Optional[int] = None

    def __post_init__(self):
        self.kind = StableKind.parse(self.kind)
        if self.n_rows < 1 or self.p_cols < 1:
            raise ParameterError(f"operator shape must be positive, got {(self.n_rows, self.p_cols)}")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if self.block_cols is None:
            self.block_cols = default_block_cols(self.n_rows, self.p_cols)
        self.block_cols = int(self.block_cols)

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.n_rows), int(self.p_cols))

    @property
    def n_blocks(self) -> int:
        return -(-self.p_cols // self.block_cols)

    def block_slice(self, c: int) -> slice:
        lo = c * self.block_cols
        return slice(lo, min(lo + self.block_cols, self.p_cols))

    def block(self, c: int) -> np.ndarray:
        """Regenerate column block ``c`` (shape ``n x width``)."""
        sl = self.block_slice(c)
        gen = self.rng.child(c).generator()
        return draw_stable_array(self.kind, self.gamma, (self.n_rows, sl.stop - sl.start), gen)

    def blocks(self) -> Iterator[Tuple[slice, np.ndarray]]:
        for c in range(self.n_blocks):
            yield self.block_slice(c), self.block(c)

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(self.n_rows)
        for c in range(self.n_blocks):
            sl = self.block_slice(c)
            vc = v[sl]
            # blocks are independent streams, so skipping one never shifts another
            if not np.any(vc):
                continue
            out += self.block(c) @ vc
        return out

    def rmatvec(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        out = np.empty(self.p_cols)
        for sl, B in self.blocks():
            out[sl] = B.T @ w
        return out

    def gram(self) -> np.ndarray:
        G = np.zeros((self.n_rows, self.n_rows))
        for _, B in self.blocks():
            G += B @ B.T
        return G

    def to_dense(self) -> np.ndarray:
        A = np.empty(self.shape)
        for sl, B in self.blocks():
            A[:, sl] = B
        return A

    def row(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_rows:
            raise ParameterError(f"row index {i} out of range")
        return np.concatenate([B[i] for _, B in self.blocks()])

    def descriptor(self) -> dict:
        return {
            "kind": self.kind.name.lower(),
            "seed": self.rng.seed,
            "stream": "/".join(str(s) for s in self.rng.stream),
            "n": self.n_rows,
            "p": self.p_cols,
            "gamma": repr(float(self.gamma)),
            "block_cols": self.block_cols,
        }

    @classmethod
    def from_descriptor(cls, d: dict) -> "StreamedOperator":
        stream = tuple(int(s) for s in str(d.get("stream", "")).split("/") if s != "")
        return cls(
            kind=d["kind"],
            n_rows=int(d["n"]),
            p_cols=int(d["p"]),
            gamma=float(d["gamma"]),
            rng=RngStream(int(d["seed"]), stream),
            block_cols=int(d["block_cols"]) if d.get("block_cols") not in (None, "") else None,
        )


@dataclass(eq=False)
class StackedOperator(_OperatorMixin):
    """Vertical concatenation of operators with a common column count."""

    parts: List = field(default_factory=list)

    def __post_init__(self):
        if not self.parts:
            raise ParameterError("need at least one operator to stack")
        p = {op.shape[1] for op in self.parts}
        if len(p) != 1:
            raise ParameterError(f"column counts differ: {sorted(p)}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (sum(op.shape[0] for op in self.parts), self.parts[0].shape[1])

    def _offsets(self) -> List[int]:
        return list(np.cumsum([0] + [op.shape[0] for op in self.parts]))

    def matvec(self, v) -> np.ndarray:
        return np.concatenate([op.matvec(v) for op in self.parts])

    def rmatvec(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        off = self._offsets()
        out = np.zeros(self.shape[1])
        for k, op in enumerate(self.parts):
            out += op.rmatvec(w[off[k]: off[k + 1]])
        return out

    def gram(self) -> np.ndarray:
        return self.to_dense_gram()

    def to_dense_gram(self) -> np.ndarray:
        # cross terms need both row groups; materializing is simplest and the
        # result is n x n anyway
        A = self.to_dense()
        return A @ A.T

    def to_dense(self) -> np.ndarray:
        return np.vstack([op.to_dense() for op in self.parts])


def as_operator(A):
    """Wrap arrays as :class:`ExplicitOperator`; pass operators through."""
    if hasattr(A, "matvec") and hasattr(A, "rmatvec"):
        return A
    return ExplicitOperator(np.asarray(A, dtype=float))
