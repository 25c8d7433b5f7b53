"""Point-cloud approximations of the three Rauzy-fractal windows.

The windows solve W_a = alpha W_c, W_b = alpha W_a u (alpha W_c + 1),
W_c = alpha W_b.  Iterating from {0} gives finite alpha-expansions, which are
star images of elements of Z[beta]; those exact coordinates are carried along
so that duplicates can be detected without relying on float equality.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import EMB, times_beta
from .cocycle import DEFAULT_TOL, MAX_STEPS, c_vectors, volume_ratio
from .inflation import LETTERS, letter_index

log = logging.getLogger(__name__)

MAX_CLOUD_POINTS = 30_000_000
GRID_CHUNK = 1 << 15


@dataclass
class WindowCloud:
    letter: str
    depth: int
    points: np.ndarray                                   # (N, 2) float
    coords: np.ndarray = field(repr=False)               # (N, 3) int64, star(coords) ~ points

    def __len__(self):
        return len(self.points)


def cloud_counts(depth: int) -> tuple[int, int, int]:
    """Cloud sizes without deduplication: N_a' = N_c, N_b' = N_a + N_c, N_c' = N_b."""
    na = nb = nc = 1
    for _ in range(depth):
        na, nb, nc = nc, na + nc, nb
    return na, nb, nc


def _dedupe(points: np.ndarray, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    _, first = np.unique(coords, axis=0, return_index=True)
    first.sort()
    return points[first], coords[first]


def iterate_ifs(depth: int, dedupe: bool = False) -> dict[str, WindowCloud]:
    """Apply the window IFS ``depth`` times to the seed {0} for every letter.

    By default the clouds are multisets: coincident points reached through
    different digit strings (alpha^3 = alpha + 1) each carry their own mass,
    which is what makes equal-weight quadrature over the cloud consistent.
    With ``dedupe`` points with identical Z[beta] coordinates are merged,
    keeping the first occurrence.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if sum(cloud_counts(depth)) > MAX_CLOUD_POINTS:
        raise MemoryError(f"IFS depth {depth} exceeds the point budget of {MAX_CLOUD_POINTS}")
    Qt = EMB.contraction_q().T
    shift = np.array([1.0, 0.0])
    pts = [np.zeros((1, 2)) for _ in LETTERS]
    exact = [np.zeros((1, 3), dtype=np.int64) for _ in LETTERS]
    for _ in range(depth):
        (pa, pb, pc), (ea, eb, ec) = pts, exact
        qa, qb, qc = pa @ Qt, pb @ Qt, pc @ Qt
        xa, xb, xc = times_beta(ea), times_beta(eb), times_beta(ec)
        xc1 = xc.copy()
        xc1[:, 0] += 1
        new_b = np.concatenate([qa, qc + shift])
        new_eb = np.concatenate([xa, xc1])
        if dedupe:
            new_b, new_eb = _dedupe(new_b, new_eb)
        pts = [qc, new_b, qb]
        exact = [xc, new_eb, xb]
    return {
        l: WindowCloud(l, depth, p, e) for l, p, e in zip(LETTERS, pts, exact)
    }


def exact_volumes() -> np.ndarray:
    """Areas of (W_a, W_b, W_c): Im(alpha) * (beta^2 - 1, beta, 1)."""
    b, im = EMB.beta, EMB.alpha_im
    return im * np.array([b * b - 1.0, b, 1.0])


def exact_volumes_polynomial() -> np.ndarray:
    """Same areas from the expanded form with denominator 2 sqrt(23)."""
    b = EMB.beta
    return np.array([
        5 - 6 * b + 4 * b * b,
        -6 - 2 * b + 9 * b * b,
        4 + 9 * b - 6 * b * b,
    ]) / (2.0 * math.sqrt(23.0))


def box_count(points: np.ndarray, cell: float) -> tuple[float, float]:
    """(area of occupied cells, mean points per occupied cell)."""
    cells = np.floor(np.asarray(points) / cell).astype(np.int64)
    occupied = len(np.unique(cells, axis=0))
    return occupied * cell * cell, len(points) / occupied


def estimate_volumes(clouds: dict[str, WindowCloud], cell: float = 0.01) -> np.ndarray:
    if cell <= 0:
        raise ValueError("cell must be positive")
    out = []
    for l in LETTERS:
        area, per_cell = box_count(clouds[l].points, cell)
        if per_cell < 2.0:
            warnings.warn(
                f"sparse occupancy for W_{l}: {per_cell:.2f} points per cell at cell={cell}; "
                "box-count estimate is unreliable",
                RuntimeWarning,
                stacklevel=2,
            )
        out.append(area)
    return np.array(out)


def window_ft_oracle(cloud: WindowCloud, y: Sequence[float] | np.ndarray) -> complex | np.ndarray:
    """Equal-mass quadrature of the inverse transform of the window indicator.

    ``y`` may be a single point or an (M, 2) array of points.
    """
    vol = exact_volumes()[letter_index(cloud.letter)]
    y_arr = np.asarray(y, dtype=float)
    single = y_arr.ndim == 1
    ys = np.atleast_2d(y_arr)
    out = np.empty(len(ys), dtype=complex)
    for i, yy in enumerate(ys):
        phase = cloud.points @ yy
        out[i] = np.exp(2j * np.pi * phase).sum()
    out *= vol / len(cloud)
    return complex(out[0]) if single else out


def write_clouds_csv(clouds: Sequence[WindowCloud], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "letter"])
        for cl in clouds:
            for x, y in cl.points.tolist():
                w.writerow([repr(x), repr(y), cl.letter])


@dataclass
class FTGrid:
    letter: str
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray      # (len(ys), len(xs)) complex; row i has y2 = ys[i]
    steps: np.ndarray
    converged: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def argument(self) -> np.ndarray:
        return np.angle(self.values)


def ft_grid(
    region: Sequence[float],
    samples: int | tuple[int, int],
    letter: str = "b",
    tol: float = DEFAULT_TOL,
    max_steps: int = MAX_STEPS,
) -> FTGrid:
    """Window transform f_letter on a regular grid via the cocycle.

    ``region`` is (xmin, xmax, ymin, ymax); nodes include both endpoints and
    the array is row-major starting at the minimum corner.
    """
    xmin, xmax, ymin, ymax = (float(r) for r in region)
    if not (xmin < xmax and ymin < ymax):
        raise ValueError("region must satisfy min < max on both axes")
    nx, ny = (samples, samples) if isinstance(samples, int) else samples
    if nx < 2 or ny < 2:
        raise ValueError("samples must be at least 2 per axis")
    i = letter_index(letter)
    xs = np.linspace(xmin, xmax, nx)
    ys = np.linspace(ymin, ymax, ny)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)
    parts = [c_vectors(nodes[s:s + GRID_CHUNK], tol=tol, max_steps=max_steps)
             for s in range(0, len(nodes), GRID_CHUNK)]
    c = np.concatenate([r.c for r in parts])
    steps = np.concatenate([r.steps for r in parts])
    conv = np.concatenate([r.converged for r in parts])
    if not conv.all():
        log.warning("%d grid nodes did not converge", int((~conv).sum()))
    vals = volume_ratio() * c[:, i]
    return FTGrid(letter, xs, ys, vals.reshape(ny, nx), steps.reshape(ny, nx), conv.reshape(ny, nx))


def write_grid_csv(grid: FTGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["yx", "yy", "re", "im", "abs", "arg"])
        for r, yy in enumerate(grid.ys):
            for c, yx in enumerate(grid.xs):
                z = complex(grid.values[r, c])
                w.writerow([repr(float(yx)), repr(float(yy)), repr(z.real), repr(z.imag),
                            repr(abs(z)), repr(math.atan2(z.imag, z.real))])


def write_pgm(layer: np.ndarray, lo: float, hi: float, path) -> None:
    """Binary 8-bit graymap; ``lo`` maps to 0 and ``hi`` to 255."""
    scaled = np.clip((np.asarray(layer) - lo) / (hi - lo), 0.0, 1.0)
    pix = np.rint(scaled * 255).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(x) for x in parts[1].split())
    if int(parts[2]) != 255:
        raise ValueError("expected maxval 255")
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def write_grid_pgms(grid: FTGrid, prefix) -> tuple[str, str]:
    vol = exact_volumes()[letter_index(grid.letter)]
    mag_path, arg_path = f"{prefix}_abs.pgm", f"{prefix}_arg.pgm"
    write_pgm(grid.magnitude, 0.0, vol, mag_path)
    write_pgm(grid.argument, -math.pi, math.pi, arg_path)
    return mag_path, arg_path
