"""Sensing operators with adjoints, column normalization, and coherence.

Two realizations of the linear map ``R^p -> R^n`` are provided: a dense
matrix (stored column-major, since column access dominates normalization and
coherence work) and a matrix-free composition of an inverse orthonormal Haar
transform, a real-valued unitary DFT, and a seeded row selection. Operators
are immutable after construction; matvec counting happens through an
external per-run :class:`MatvecCounter`, never through operator state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

#: Largest implicit-operator column count for which mutual coherence is
#: computed by densification (O(p^2 n) work).
COHERENCE_BUDGET_P = 4096


class MatvecCounter:
    """Accumulates the number of operator applications for one run."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def tick(self) -> None:
        self.count += 1


# ---------------------------------------------------------------------------
# Orthonormal Haar transform
# ---------------------------------------------------------------------------


def haar_forward(x: np.ndarray, levels: int) -> np.ndarray:
    """Multi-level orthonormal Haar analysis.

    Coefficient layout: ``[approx_L | detail_L | detail_{L-1} | ... | detail_1]``
    where ``L = levels``. Requires ``len(x)`` divisible by ``2**levels``.
    """
    x = np.asarray(x, dtype=np.float64)
    p = x.size
    _check_haar_dims(p, levels)
    out = np.empty(p)
    a = x
    hi = p
    for _ in range(levels):
        pairs = a.reshape(-1, 2)
        detail = (pairs[:, 0] - pairs[:, 1]) / math.sqrt(2.0)
        a = (pairs[:, 0] + pairs[:, 1]) / math.sqrt(2.0)
        lo = hi - detail.size
        out[lo:hi] = detail
        hi = lo
    out[:hi] = a
    return out


def haar_inverse(c: np.ndarray, levels: int) -> np.ndarray:
    """Inverse of :func:`haar_forward` (exact orthonormal round trip)."""
    c = np.asarray(c, dtype=np.float64)
    p = c.size
    _check_haar_dims(p, levels)
    a = c[: p >> levels].copy()
    for lev in range(levels, 0, -1):
        detail = c[p >> lev : p >> (lev - 1)]
        merged = np.empty(2 * a.size)
        merged[0::2] = (a + detail) / math.sqrt(2.0)
        merged[1::2] = (a - detail) / math.sqrt(2.0)
        a = merged
    return a


def _check_haar_dims(p: int, levels: int) -> None:
    if levels < 1:
        raise ValueError(f"wavelet depth must be >= 1, got {levels}")
    if p % (1 << levels) != 0:
        raise ValueError(f"signal length {p} is not divisible by 2**{levels}")


# ---------------------------------------------------------------------------
# Real-valued unitary DFT
# ---------------------------------------------------------------------------
#
# Row order of the p x p orthogonal matrix (p even):
#   row 0            : DC, entries 1/sqrt(p)
#   rows 1 .. p/2-1  : sqrt(2/p) * cos(2 pi k j / p), k = 1 .. p/2-1
#   row p/2          : Nyquist, entries (-1)^j / sqrt(p)
#   rows p/2+1 .. p-1: sqrt(2/p) * sin(2 pi k j / p), k = 1 .. p/2-1
#
# Cos/sin rows carry the sqrt(2) so the stack stays orthonormal; DC and
# Nyquist rows are unscaled.


def real_dft(v: np.ndarray) -> np.ndarray:
    p = v.size
    half = p // 2
    c = np.fft.rfft(v)
    root = math.sqrt(p)
    out = np.empty(p)
    out[0] = c[0].real / root
    out[1:half] = math.sqrt(2.0) * c[1:half].real / root
    out[half] = c[half].real / root
    out[half + 1 :] = -math.sqrt(2.0) * c[1:half].imag / root
    return out


def real_dft_adjoint(u: np.ndarray) -> np.ndarray:
    p = u.size
    half = p // 2
    scale = math.sqrt(p) / math.sqrt(2.0)
    c = np.empty(half + 1, dtype=np.complex128)
    c[0] = u[0] * math.sqrt(p)
    c[half] = u[half] * math.sqrt(p)
    c[1:half] = scale * (u[1:half] - 1j * u[half + 1 :])
    return np.fft.irfft(c, n=p)


# ---------------------------------------------------------------------------
# Operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SensingOperator:
    """Linear map ``R^p -> R^n`` with unit-norm columns and an adjoint.

    ``kind`` is ``"dense"`` or ``"partial-fft-haar"``. Dense operators carry
    the column-major matrix in ``matrix``; the implicit kind carries the
    selected frequency-row indices, the wavelet depth, and the per-column
    scale that restores unit column norms.
    """

    n: int
    p: int
    kind: str
    matrix: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None
    levels: int = 0
    col_scale: Optional[np.ndarray] = None
    seed: Optional[int] = field(default=None, compare=False)

    def apply(self, x: np.ndarray, counter: Optional[MatvecCounter] = None) -> np.ndarray:
        """Forward map ``x -> Psi x``; counts as one matvec."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.p,):
            raise ValueError(f"expected signal of length {self.p}, got shape {x.shape}")
        if counter is not None:
            counter.tick()
        if self.kind == "dense":
            return self.matrix @ x
        return real_dft(haar_inverse(x / self.col_scale, self.levels))[self.rows]

    def apply_adjoint(self, r: np.ndarray, counter: Optional[MatvecCounter] = None) -> np.ndarray:
        """Adjoint map ``r -> Psi^t r``; counts as one matvec."""
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.n,):
            raise ValueError(f"expected residual of length {self.n}, got shape {r.shape}")
        if counter is not None:
            counter.tick()
        if self.kind == "dense":
            return self.matrix.T @ r
        full = np.zeros(self.p)
        full[self.rows] = r
        return haar_forward(real_dft_adjoint(full), self.levels) / self.col_scale

    def densify(self) -> np.ndarray:
        """Materialize the operator as an ``n x p`` array (diagnostics only)."""
        if self.kind == "dense":
            return np.array(self.matrix)
        cols = np.empty((self.n, self.p), order="F")
        e = np.zeros(self.p)
        for j in range(self.p):
            e[j] = 1.0
            cols[:, j] = self.apply(e)
            e[j] = 0.0
        return cols

    def config(self) -> dict:
        """JSON-serializable description (reconstructs implicit operators)."""
        cfg = {"kind": self.kind, "n": self.n, "p": self.p}
        if self.kind == "partial-fft-haar":
            cfg["levels"] = self.levels
            cfg["seed"] = self.seed
        return cfg


@dataclass(frozen=True)
class CoherenceReport:
    """Mutual coherence ``mu`` and the column pair attaining it."""

    mu: float
    argmax_pair: tuple[int, int]

    def assumption_holds(self, s: int) -> bool:
        """Whether ``mu * s < 1/2``, the regime the recovery guarantee needs."""
        return self.mu * s < 0.5


def dense_operator(matrix: np.ndarray, seed: Optional[int] = None) -> SensingOperator:
    """Wrap an already column-normalized matrix as a dense operator."""
    matrix = np.asfortranarray(matrix, dtype=np.float64)
    n, p = matrix.shape
    if n < 1 or p < 1:
        raise ValueError(f"operator dimensions must be >= 1, got {n} x {p}")
    norms = np.linalg.norm(matrix, axis=0)
    if not np.allclose(norms, 1.0, rtol=1e-12, atol=1e-12):
        worst = int(np.argmax(np.abs(norms - 1.0)))
        raise ValueError(
            f"columns must have unit norm; column {worst} has norm {norms[worst]:.3g}"
        )
    matrix.setflags(write=False)
    return SensingOperator(n=n, p=p, kind="dense", matrix=matrix, seed=seed)


def normalize_columns(raw: np.ndarray) -> tuple[SensingOperator, np.ndarray]:
    """Scale every column of ``raw`` to unit Euclidean norm.

    Returns the normalized operator and the original column norms, so a
    solution in normalized coordinates can be mapped back.
    """
    raw = np.asarray(raw, dtype=np.float64)
    scales = np.linalg.norm(raw, axis=0)
    zero = np.flatnonzero(scales == 0.0)
    if zero.size:
        raise ValueError(f"column {int(zero[0])} is the zero vector")
    mat = np.asfortranarray(raw / scales)
    mat.setflags(write=False)
    n, p = mat.shape
    return SensingOperator(n=n, p=p, kind="dense", matrix=mat), scales


def mutual_coherence(op: SensingOperator, budget_p: int = COHERENCE_BUDGET_P) -> CoherenceReport:
    """Exact maximum of ``|<psi_i, psi_j>|`` over all column pairs ``i != j``.

    Implicit operators are densified column-by-column first, which costs p
    operator applications; refuse when ``p`` exceeds ``budget_p``.
    """
    if op.kind != "dense" and op.p > budget_p:
        raise ValueError(
            f"coherence computation over budget: p={op.p} exceeds {budget_p} "
            "for an implicit operator"
        )
    mat = op.matrix if op.kind == "dense" else op.densify()
    gram = np.abs(mat.T @ mat)
    np.fill_diagonal(gram, -1.0)
    flat = int(np.argmax(gram))
    i, j = divmod(flat, op.p)
    mu = float(min(gram[i, j], 1.0))
    return CoherenceReport(mu=mu, argmax_pair=(min(i, j), max(i, j)))


def make_partial_fft_haar(p: int, n: int, levels: int, seed: int) -> SensingOperator:
    """Compose row-subsampled real DFT with an inverse Haar transform.

    The map is ``x -> S F W^{-1} (x / d)`` where ``W^{-1}`` is the inverse
    orthonormal Haar transform at the given depth, ``F`` the real unitary
    DFT above, ``S`` a seeded uniform-without-replacement selection of ``n``
    of the ``p`` real frequency rows, and ``d`` the vector of column norms
    of the unscaled composition, so every column of the result is unit-norm.
    ``p`` must be a power of two.
    """
    if p < 2 or (p & (p - 1)) != 0:
        raise ValueError(f"signal length must be a power of two, got {p}")
    if not 1 <= n <= p:
        raise ValueError(f"row count must satisfy 1 <= n <= {p}, got {n}")
    _check_haar_dims(p, levels)
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(p, size=n, replace=False))
    rows.setflags(write=False)

    # Column norms of the unnormalized composition, via n adjoint rows.
    sq = np.zeros(p)
    unit = np.zeros(p)
    for k in rows:
        unit[k] = 1.0
        sq += haar_forward(real_dft_adjoint(unit), levels) ** 2
        unit[k] = 0.0
    zero = np.flatnonzero(sq == 0.0)
    if zero.size:
        raise ValueError(f"column {int(zero[0])} is the zero vector after row selection")
    col_scale = np.sqrt(sq)
    col_scale.setflags(write=False)
    return SensingOperator(
        n=n,
        p=p,
        kind="partial-fft-haar",
        rows=rows,
        levels=levels,
        col_scale=col_scale,
        seed=seed,
    )
