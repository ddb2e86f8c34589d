"""Seeded generation of sensing matrices, sparse signals, and noisy data.

Every generator is a pure function of its parameters and seed. A problem's
master seed is split into independent matrix/signal/noise streams, so e.g.
changing only ``sigma`` regenerates the same matrix and signal with the same
noise direction at a different scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .linop import SensingOperator, dense_operator, make_partial_fft_haar, normalize_columns
from .storage import operator_from_config, read_array, write_array

SeedLike = Union[int, np.random.SeedSequence]

# Stream tags for splitting a master seed.
_MATRIX_STREAM = 0
_SIGNAL_STREAM = 1
_NOISE_STREAM = 2

MATRIX_KINDS = ("gaussian", "bernoulli", "correlated", "fft-haar")


def _substream(seed: SeedLike, tag: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        key = tuple(seed.spawn_key) + (tag,)
    else:
        entropy = seed
        key = (tag,)
    return np.random.SeedSequence(entropy=entropy, spawn_key=key)


@dataclass
class Problem:
    """A sensing instance: operator, ground truth, and noisy data.

    ``y`` is stored exactly as generated (never recomputed), ``epsilon`` is
    the realized noise norm, ``meta`` echoes every generation parameter.
    """

    op: SensingOperator
    x_true: np.ndarray
    y: np.ndarray
    sigma: float
    epsilon: float
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def s(self) -> int:
        return int(np.count_nonzero(self.x_true))


def gen_gaussian_matrix(n: int, p: int, seed: SeedLike) -> SensingOperator:
    """i.i.d. standard normal entries, columns scaled to unit norm."""
    rng = np.random.default_rng(seed)
    op, _ = normalize_columns(rng.standard_normal((n, p)))
    return op


def gen_bernoulli_matrix(n: int, p: int, seed: SeedLike) -> SensingOperator:
    """Equiprobable ±1 entries; normalization makes every entry ±1/sqrt(n)."""
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=(n, p)).astype(np.float64) * 2.0 - 1.0
    return dense_operator(signs / math.sqrt(n))


def gen_correlated_gaussian(n: int, p: int, nu: float, seed: SeedLike) -> SensingOperator:
    """Gaussian columns mixed in adjacent pairs to raise coherence.

    Columns 2i and 2i+1 become ``z_{2i} + nu*z_{2i+1}`` and
    ``nu*z_{2i} + z_{2i+1}``, so their normalized inner product concentrates
    at ``2*nu/(1+nu^2)``; larger ``nu`` gives larger coherence. ``nu=0``
    reproduces :func:`gen_gaussian_matrix` bit for bit.
    """
    if nu < 0:
        raise ValueError(f"mixing weight must be >= 0, got {nu}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    if nu == 0:
        raw = z
    else:
        raw = z.copy()
        pairs = p // 2
        a = z[:, 0 : 2 * pairs : 2]
        b = z[:, 1 : 2 * pairs : 2]
        raw[:, 0 : 2 * pairs : 2] = a + nu * b
        raw[:, 1 : 2 * pairs : 2] = nu * a + b
    op, _ = normalize_columns(raw)
    return op


def gen_sparse_signal(p: int, s: int, dr: float, seed: SeedLike) -> np.ndarray:
    """s-sparse signal with log-uniform magnitudes spanning exactly ``dr``.

    Support is uniform without replacement; magnitudes are ``10**u`` with
    ``u`` uniform on ``[0, log10(dr)]``, then the extreme entries are pinned
    to 1 and ``dr`` so the realized max/min ratio is exact; signs are ±1
    equiprobable. ``s=1`` gives a single unit-magnitude entry.
    """
    if not 1 <= s <= p:
        raise ValueError(f"sparsity must satisfy 1 <= s <= {p}, got {s}")
    if dr < 1:
        raise ValueError(f"dynamic range must be >= 1, got {dr}")
    rng = np.random.default_rng(seed)
    support = rng.choice(p, size=s, replace=False)
    if s == 1:
        mags = np.ones(1)
    else:
        u = rng.uniform(0.0, math.log10(dr), size=s)
        mags = 10.0 ** u
        lo = int(np.argmin(u))
        hi = int(np.argmax(u))
        if hi == lo:  # all-equal draw (dr == 1)
            hi = (lo + 1) % s
        mags[lo] = 1.0
        mags[hi] = float(dr)
    signs = rng.integers(0, 2, size=s).astype(np.float64) * 2.0 - 1.0
    x = np.zeros(p)
    x[support] = signs * mags
    return x


def gen_problem(
    matrix_kind: str,
    n: int,
    p: int,
    s: int,
    dr: float,
    sigma: float,
    nu: Optional[float] = None,
    seed: int = 0,
    levels: int = 2,
) -> Problem:
    """Compose matrix, signal, and noise into one instance.

    ``nu`` is required for (and only used by) the ``correlated`` kind;
    ``levels`` only by ``fft-haar``, whose signal is sparse in the
    coefficient domain the operator expects.
    """
    if sigma < 0:
        raise ValueError(f"noise level must be >= 0, got {sigma}")
    mat_ss = _substream(seed, _MATRIX_STREAM)
    if matrix_kind == "gaussian":
        op = gen_gaussian_matrix(n, p, mat_ss)
    elif matrix_kind == "bernoulli":
        op = gen_bernoulli_matrix(n, p, mat_ss)
    elif matrix_kind == "correlated":
        if nu is None:
            raise ValueError("the correlated kind needs a mixing weight nu")
        op = gen_correlated_gaussian(n, p, nu, mat_ss)
    elif matrix_kind == "fft-haar":
        op = make_partial_fft_haar(p, n, levels, seed=int(mat_ss.generate_state(1)[0]))
    else:
        raise ValueError(f"unknown matrix kind {matrix_kind!r}; expected one of {MATRIX_KINDS}")

    x_true = gen_sparse_signal(p, s, dr, _substream(seed, _SIGNAL_STREAM))
    noise = sigma * np.random.default_rng(_substream(seed, _NOISE_STREAM)).standard_normal(n)
    y = op.apply(x_true) + noise
    meta = {
        "matrix_kind": matrix_kind,
        "n": n,
        "p": p,
        "s": s,
        "dr": dr,
        "sigma": sigma,
        "nu": nu,
        "levels": levels if matrix_kind == "fft-haar" else None,
        "seed": seed,
    }
    return Problem(
        op=op,
        x_true=x_true,
        y=y,
        sigma=sigma,
        epsilon=float(np.linalg.norm(noise)),
        seed=seed,
        meta=meta,
    )


def save_problem(problem: Problem, out_dir: Union[str, Path]) -> Path:
    """Write a problem directory: binary arrays plus a JSON manifest.

    Dense operators get a ``matrix.bin``; the implicit kind is rebuilt from
    its config. Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_array(out / "x_true.bin", problem.x_true)
    write_array(out / "y.bin", problem.y)
    op_cfg = problem.op.config()
    if problem.op.kind == "dense":
        write_array(out / "matrix.bin", np.asarray(problem.op.matrix))
    manifest = {
        "op": op_cfg,
        "sigma": problem.sigma,
        "epsilon": problem.epsilon,
        "seed": problem.seed,
        "meta": problem.meta,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_problem(in_dir: Union[str, Path]) -> Problem:
    """Inverse of :func:`save_problem`."""
    src = Path(in_dir)
    manifest_path = src / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {src}")
    manifest = json.loads(manifest_path.read_text())
    op_cfg = manifest["op"]
    matrix_path = src / "matrix.bin" if op_cfg.get("kind") == "dense" else None
    op = operator_from_config(op_cfg, matrix_path)
    return Problem(
        op=op,
        x_true=read_array(src / "x_true.bin"),
        y=read_array(src / "y.bin"),
        sigma=float(manifest["sigma"]),
        epsilon=float(manifest["epsilon"]),
        seed=int(manifest["seed"]),
        meta=manifest.get("meta", {}),
    )
