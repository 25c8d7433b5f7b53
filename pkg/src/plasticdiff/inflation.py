"""The ternary substitution a -> b -> c -> ab and its exact inflation patches."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .algebra import (
    EMB,
    BetaInt,
    beta_power,
    mul_array,
    real_embed,
    real_embed_array,
    times_beta,
)

log = logging.getLogger(__name__)

LETTERS = "abc"
RULE = {"a": "b", "b": "c", "c": "ab"}
SUBSTITUTION_MATRIX = np.array([[0, 0, 1], [1, 0, 1], [0, 1, 0]])
TILE_LENGTHS = {"a": BetaInt(1, 0, 0), "b": BetaInt(0, 1, 0), "c": BetaInt(0, 0, 1)}

# Patches above this many points are refused by ``inflate``; use
# ``iter_patch_chunks`` to stream them instead.
MAX_MATERIALISED_POINTS = 40_000_000

_CHILD_COUNT = np.array([1, 1, 2])
_FIRST_CHILD = np.array([1, 2, 0], dtype=np.uint8)
_TILE_COORDS = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.int64)


def letter_index(letter: str) -> int:
    try:
        return LETTERS.index(letter)
    except ValueError:
        raise ValueError(f"unknown letter {letter!r}; expected one of a, b, c") from None


def substitute(word: str) -> str:
    try:
        return "".join(RULE[ch] for ch in word)
    except KeyError as exc:
        raise ValueError(f"unknown letter {exc.args[0]!r}; expected one of a, b, c") from None


def substitute_power(word: str, m: int) -> str:
    for _ in range(m):
        word = substitute(word)
    return word


def letter_counts(m: int, seed: str) -> np.ndarray:
    """Numbers of a, b, c in rho^m(seed), i.e. column ``seed`` of M^m."""
    if m < 0:
        raise ValueError("depth must be non-negative")
    counts = [0, 0, 0]
    counts[letter_index(seed)] = 1
    for _ in range(m):
        na, nb, nc = counts
        counts = [nc, na + nc, nb]
    return np.array(counts, dtype=object)


def word_length(m: int, seed: str = "a") -> int:
    return int(sum(letter_counts(m, seed)))


@dataclass(frozen=True)
class ControlPoint:
    position: BetaInt
    letter: str


@dataclass
class Patch:
    """Control points of rho^m(seed) grown rightwards from 0, in word order.

    ``coords`` holds exact Z[beta] coordinates (int64, shape (N, 3)) and
    ``letters`` the tile types as codes 0, 1, 2 for a, b, c.
    """

    depth: int
    seed: str
    coords: np.ndarray
    letters: np.ndarray

    def __len__(self):
        return len(self.letters)

    def positions(self) -> np.ndarray:
        return real_embed_array(self.coords)

    def length(self) -> BetaInt:
        last = BetaInt(*(int(c) for c in self.coords[-1]))
        return last + TILE_LENGTHS[LETTERS[self.letters[-1]]]

    def word(self) -> str:
        return "".join(LETTERS[i] for i in self.letters)

    def control_points(self) -> list[ControlPoint]:
        return [
            ControlPoint(BetaInt(int(n0), int(n1), int(n2)), LETTERS[l])
            for (n0, n1, n2), l in zip(self.coords.tolist(), self.letters.tolist())
        ]

    def to_csv(self, path) -> None:
        pos = self.positions()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n0", "n1", "n2", "letter", "position_real"])
            for (n0, n1, n2), l, x in zip(self.coords.tolist(), self.letters.tolist(), pos):
                w.writerow([n0, n1, n2, LETTERS[l], repr(float(x))])


def _inflate_step(coords: np.ndarray, letters: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Lambda_a' = b Lambda_c, Lambda_b' = b Lambda_a u (b Lambda_c + 1), Lambda_c' = b Lambda_b,
    # emitted in word order so that each parent is replaced by its image.
    reps = _CHILD_COUNT[letters]
    scaled = times_beta(coords)
    new_coords = np.repeat(scaled, reps, axis=0)
    new_letters = np.repeat(_FIRST_CHILD[letters], reps)
    starts = np.cumsum(reps) - reps
    second = starts[letters == 2] + 1
    new_letters[second] = 1
    new_coords[second, 0] += 1
    return new_coords, new_letters


def inflate(m: int, seed: str = "a") -> Patch:
    """Exact patch rho^m(seed) with the seed tile's control point at 0."""
    if m < 0:
        raise ValueError("depth must be non-negative")
    n = word_length(m, seed)
    if n > MAX_MATERIALISED_POINTS:
        raise MemoryError(
            f"patch of depth {m} has {n} points; stream it with iter_patch_chunks"
        )
    coords = np.zeros((1, 3), dtype=np.int64)
    letters = np.array([letter_index(seed)], dtype=np.uint8)
    for _ in range(m):
        coords, letters = _inflate_step(coords, letters)
    return Patch(m, seed, coords, letters)


def inflate_points(m: int, seed: str = "a") -> list[ControlPoint]:
    return inflate(m, seed).control_points()


def patch_length(m: int, seed: str = "a") -> BetaInt:
    """Exact length of rho^m(seed): beta^m times the seed tile length."""
    return beta_power(m) * TILE_LENGTHS[seed]


def iter_patch_chunks(
    m: int, seed: str = "a", chunk_points: int = 1 << 20
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Stream (positions, letters) of rho^m(seed) in word order.

    The patch is split as rho^j(seed) with each tile replaced by a
    precomputed rho^(m-j) sub-patch, shifted by beta^(m-j) times the tile's
    exact position.  Positions are summed exactly before conversion to float.
    """
    sub_depth = 0
    while sub_depth < m and max(word_length(sub_depth + 1, l) for l in LETTERS) <= chunk_points:
        sub_depth += 1
    top = inflate(m - sub_depth, seed)
    subs = {l: inflate(sub_depth, l) for l in LETTERS}
    shifts = mul_array(top.coords, beta_power(sub_depth))
    for shift, code in zip(shifts, top.letters):
        sub = subs[LETTERS[code]]
        coords = sub.coords + shift
        yield real_embed_array(coords), sub.letters


@dataclass(frozen=True)
class PFData:
    matrix: np.ndarray
    u: np.ndarray
    v: np.ndarray
    beta: float


def pf_data() -> PFData:
    b = EMB.beta
    dens = (3.0 + b + 7.0 * b * b) / 23.0
    u = dens * np.array([1.0, b, b * b])
    v = np.array([2.0 - b * b, b * b - b, b - 1.0])
    M = SUBSTITUTION_MATRIX
    if (np.abs(M @ v - b * v).max() > 1e-12 or np.abs(u @ M - b * u).max() > 1e-12
            or abs(v.sum() - 1.0) > 1e-12 or abs(u @ v - 1.0) > 1e-12):
        raise ArithmeticError("Perron-Frobenius closed forms failed validation")
    return PFData(M.copy(), u, v, b)


def projector() -> np.ndarray:
    """P = |v><u|, the limit of beta^-n M^n."""
    pf = pf_data()
    return np.outer(pf.v, pf.u)


def densities() -> tuple[float, float, float, float]:
    """(dens Lambda, dens Lambda_a, dens Lambda_b, dens Lambda_c)."""
    dens = real_embed((3, 1, 7)) / 23.0
    v = pf_data().v
    return (dens, *(float(x) for x in dens * v))


def letter_frequencies(patch: Patch) -> np.ndarray:
    return np.bincount(patch.letters, minlength=3) / len(patch)
