"""Internal Fourier matrix, its cocycle, and the Bragg amplitudes it yields.

The window transforms obey f(y) = beta^-1 B(y) f(R y) with R contracting,
so c(y) = lim beta^-n B(y) B(Ry) ... B(R^(n-1) y) c(R^n y).  The tail value
c(R^n y) is replaced by a truncated Taylor expansion of c at the origin
(``order = 0`` is the plain choice c(0) = v); its coefficients follow from
the same functional equation.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .algebra import EMB, wave_number, wave_numbers_array
from .inflation import SUBSTITUTION_MATRIX, densities, pf_data

DEFAULT_TOL = 1e-12
MIN_STEPS = 30
MAX_STEPS = 200
DEFAULT_SEED_ORDER = 8
DEFAULT_KSTAR_MAX = 15.0

_BETA = EMB.beta
_ALPHA = EMB.alpha
_ALPHA_BAR = _ALPHA.conjugate()


class NonConvergenceError(ArithmeticError):
    """The cocycle product did not settle within the step cap."""


def fourier_matrix(y: Sequence[float]) -> np.ndarray:
    B = SUBSTITUTION_MATRIX.astype(complex)
    B[1, 2] = np.exp(2j * np.pi * y[0])
    return B


def contraction() -> np.ndarray:
    """R = Q^T, acting on internal-space vectors."""
    return EMB.contraction_r()


def cocycle_product(y: Sequence[float], n: int) -> np.ndarray:
    """B(y) B(Ry) ... B(R^(n-1) y), multiplied left to right."""
    if n < 1:
        raise ValueError("n must be at least 1")
    R = contraction()
    y = np.asarray(y, dtype=float)
    P = np.eye(3, dtype=complex)
    for _ in range(n):
        P = P @ fourier_matrix(y)
        y = R @ y
    return P


@lru_cache(maxsize=None)
def taylor_coefficients(order: int) -> dict[tuple[int, int], np.ndarray]:
    """Coefficients a[p, q] with c(z) = sum a[p, q] z^p conj(z)^q, p + q <= order.

    Here z = y1 + i y2.  R acts as z -> conj(alpha) z and the phase in B is
    exp(pi i z) exp(pi i conj(z)), so matching powers gives
    (I - lam M / beta) a[p, q] = E_bc sum e[r, s] lam' a[p-r, q-s] / beta.
    """
    v = pf_data().v.astype(complex)
    M = SUBSTITUTION_MATRIX.astype(complex)
    a: dict[tuple[int, int], np.ndarray] = {(0, 0): v}
    for deg in range(1, order + 1):
        for p in range(deg + 1):
            q = deg - p
            rhs = 0j
            for r in range(p + 1):
                for s in range(q + 1):
                    if r == s == 0:
                        continue
                    e = (1j * np.pi) ** (r + s) / (math.factorial(r) * math.factorial(s))
                    lam = _ALPHA_BAR ** (p - r) * _ALPHA ** (q - s)
                    rhs += e * lam * a[(p - r, q - s)][2]
            lam = _ALPHA_BAR**p * _ALPHA**q
            lhs = np.eye(3) - lam * M / _BETA
            b = np.array([0.0, rhs / _BETA, 0.0], dtype=complex)
            a[(p, q)] = np.linalg.solve(lhs, b)
    return a


def taylor_seed(w: np.ndarray, order: int) -> np.ndarray:
    """Evaluate the order-``order`` Taylor polynomial of c at complex points w."""
    w = np.asarray(w, dtype=complex)
    out = np.zeros(w.shape + (3,), dtype=complex)
    coeffs = taylor_coefficients(order)
    wp = [np.ones_like(w)]
    wq = [np.ones_like(w)]
    wc = np.conj(w)
    for _ in range(order):
        wp.append(wp[-1] * w)
        wq.append(wq[-1] * wc)
    # highest degree first to keep the small terms from being swamped
    for (p, q) in sorted(coeffs, key=lambda pq: -(pq[0] + pq[1])):
        out += (wp[p] * wq[q])[..., None] * coeffs[(p, q)]
    return out


@dataclass
class CResult:
    c: np.ndarray          # (N, 3) complex
    steps: np.ndarray      # (N,) int
    converged: np.ndarray  # (N,) bool


def c_vectors(
    ys: np.ndarray,
    tol: float = DEFAULT_TOL,
    order: int = DEFAULT_SEED_ORDER,
    min_steps: int = MIN_STEPS,
    max_steps: int = MAX_STEPS,
) -> CResult:
    """c(y) = C(y) v for each row of ``ys`` (shape (N, 2)).

    Iterates c_n = beta^-n B^(n)(y) s(R^n y) and stops, per node, at the first
    n >= min_steps where successive iterates differ by less than ``tol`` in
    max-norm.  Nodes still moving at ``max_steps`` are flagged unconverged and
    carry their last iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    n_nodes = len(ys)
    z = ys[:, 0] + 1j * ys[:, 1]
    c_out = np.zeros((n_nodes, 3), dtype=complex)
    steps = np.full(n_nodes, max_steps, dtype=int)
    done = np.zeros(n_nodes, dtype=bool)

    active = np.arange(n_nodes)
    P = np.broadcast_to(np.eye(3, dtype=complex), (n_nodes, 3, 3)).copy()
    prev = taylor_seed(z, order) if order else np.tile(pf_data().v.astype(complex), (n_nodes, 1))
    v = pf_data().v.astype(complex)
    for n in range(1, max_steps + 1):
        phase = np.exp(2j * np.pi * z.real)
        col0 = P[:, :, 1].copy()
        col1 = P[:, :, 2].copy()
        P[:, :, 2] = (P[:, :, 0] + phase[:, None] * P[:, :, 1]) / _BETA
        P[:, :, 0] = col0 / _BETA
        P[:, :, 1] = col1 / _BETA
        z = z * _ALPHA_BAR
        seed = taylor_seed(z, order) if order else np.broadcast_to(v, (len(z), 3))
        cur = np.einsum("nij,nj->ni", P, seed)
        if n >= min_steps:
            diff = np.abs(cur - prev).max(axis=1)
            hit = diff < tol
            if n == max_steps:
                c_out[active] = cur
            if hit.any():
                idx = active[hit]
                c_out[idx] = cur[hit]
                steps[idx] = n
                done[idx] = True
                keep = ~hit
                active, P, z, cur = active[keep], P[keep], z[keep], cur[keep]
                if not len(active):
                    break
        prev = cur
    return CResult(c_out, steps, done)


def c_vector(
    y: Sequence[float], tol: float = DEFAULT_TOL, order: int = DEFAULT_SEED_ORDER,
    max_steps: int = MAX_STEPS,
) -> tuple[np.ndarray, int]:
    res = c_vectors(np.asarray([y], dtype=float), tol=tol, order=order, max_steps=max_steps)
    if not res.converged[0]:
        raise NonConvergenceError(f"c(y) did not converge for y={tuple(y)} in {max_steps} steps")
    return res.c[0], int(res.steps[0])


def c_matrix(
    y: Sequence[float], tol: float = 1e-10, min_steps: int = MIN_STEPS,
    max_steps: int = MAX_STEPS,
) -> tuple[np.ndarray, int]:
    """The full matrix C(y) as the truncated product beta^-n B^(n)(y), no seeding."""
    R = contraction()
    y = np.asarray(y, dtype=float)
    P = np.eye(3, dtype=complex)
    for n in range(1, max_steps + 1):
        nxt = P @ fourier_matrix(y) / _BETA
        y = R @ y
        if n >= min_steps and np.abs(nxt - P).max() < tol:
            return nxt, n
        P = nxt
    raise NonConvergenceError(f"C(y) did not converge in {max_steps} steps")


def volume_ratio() -> float:
    """dens(Lambda) / dens(lattice): converts c(y) into window transforms f(y)."""
    return densities()[0] / (2.0 / math.sqrt(23.0))


def f_vector(y: Sequence[float], tol: float = DEFAULT_TOL, order: int = DEFAULT_SEED_ORDER) -> np.ndarray:
    """Inverse Fourier transforms (f_a, f_b, f_c)(y) of the three windows."""
    c, _ = c_vector(y, tol=tol, order=order)
    return volume_ratio() * c


def amplitudes(miller: Iterable[int], tol: float = DEFAULT_TOL) -> np.ndarray:
    """(A_a, A_b, A_c) = dens(Lambda) c(kdual) at the Miller triple's wave number."""
    c, _ = c_vector(wave_number(miller).kdual, tol=tol)
    return densities()[0] * c


def intensity(miller: Iterable[int], h: Sequence[complex] = (1, 1, 1), tol: float = DEFAULT_TOL) -> float:
    A = amplitudes(miller, tol=tol)
    return float(abs(np.dot(np.asarray(h, dtype=complex), A)) ** 2)


@dataclass(frozen=True)
class PeakRecord:
    miller: tuple[int, int, int]
    k: float
    amplitudes: tuple[complex, complex, complex]
    intensity: float
    converged: bool = True

    def row(self) -> list:
        A = self.amplitudes
        return [*self.miller, self.k, A[0].real, A[0].imag, A[1].real, A[1].imag,
                A[2].real, A[2].imag, self.intensity]


PEAK_COLUMNS = ["n0", "n1", "n2", "k", "ReA_a", "ImA_a", "ReA_b", "ImA_b",
                "ReA_c", "ImA_c", "intensity"]


def miller_box(kmax: float, kstar_max: float) -> list[tuple[int, int]]:
    """Integer ranges for (n0, n1, n2) covering 0 <= k <= kmax, |kdual| <= kstar_max.

    The map n -> (k, kdual) is linear; inverting it bounds each n_i over the
    cylinder by its extremes (linear in k, Cauchy-Schwarz in k*).
    """
    cols = np.eye(3, dtype=np.int64)
    k, ks = wave_numbers_array(cols)
    G = np.vstack([k, ks.T])          # columns = images of unit Miller vectors
    H = np.linalg.inv(G)
    ranges = []
    for i in range(3):
        lin = (0.0, H[i, 0] * kmax)
        rad = float(np.hypot(H[i, 1], H[i, 2])) * kstar_max
        lo = math.floor(min(lin) - rad - 1e-9)
        hi = math.ceil(max(lin) + rad + 1e-9)
        ranges.append((lo, hi))
    return ranges


def enumerate_miller(kmax: float, kstar_max: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All Miller triples in the region, with their k and k*, sorted by (k, n)."""
    (a0, b0), (a1, b1), (a2, b2) = miller_box(kmax, kstar_max)
    n1, n2 = np.meshgrid(np.arange(a1, b1 + 1), np.arange(a2, b2 + 1), indexing="ij")
    n1, n2 = n1.ravel(), n2.ravel()
    found = []
    for n0 in range(a0, b0 + 1):
        tri = np.stack([np.full_like(n1, n0), n1, n2], axis=1)
        k, ks = wave_numbers_array(tri)
        keep = (k >= 0) & (k <= kmax) & (np.hypot(ks[:, 0], ks[:, 1]) <= kstar_max)
        keep |= (tri == 0).all(axis=1)
        found.append(tri[keep])
    miller = np.concatenate(found) if found else np.zeros((0, 3), dtype=np.int64)
    k, ks = wave_numbers_array(miller)
    order = np.lexsort((miller[:, 2], miller[:, 1], miller[:, 0], k))
    return miller[order], k[order], ks[order]


def peak_list(
    kmax: float,
    kstar_max: float = DEFAULT_KSTAR_MAX,
    imin: float = 0.0,
    h: Sequence[complex] = (1, 1, 1),
    tol: float = DEFAULT_TOL,
    workers: int = 1,
    chunk: int = 4096,
    max_steps: int = MAX_STEPS,
) -> list[PeakRecord]:
    """Bragg peaks with 0 <= k <= kmax and intensity >= imin, sorted by k.

    ``kstar_max`` bounds the internal argument |kdual| at which the window
    transforms are sampled; they decay in that variable.
    """
    if kmax < 0 or kstar_max <= 0:
        raise ValueError("kmax must be >= 0 and kstar_max > 0")
    miller, k, ks = enumerate_miller(kmax, kstar_max)
    pieces = [slice(i, i + chunk) for i in range(0, len(k), chunk)]
    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: c_vectors(ks[s], tol=tol, max_steps=max_steps), pieces))
    else:
        results = [c_vectors(ks[s], tol=tol, max_steps=max_steps) for s in pieces]
    if results:
        c = np.concatenate([r.c for r in results])
        conv = np.concatenate([r.converged for r in results])
    else:
        c = np.zeros((0, 3), dtype=complex)
        conv = np.zeros(0, dtype=bool)
    A = densities()[0] * c
    inten = np.abs(A @ np.asarray(h, dtype=complex)) ** 2
    peaks = []
    for i in np.nonzero(inten >= imin)[0]:
        peaks.append(PeakRecord(
            tuple(int(x) for x in miller[i]), float(k[i]),
            tuple(complex(x) for x in A[i]), float(inten[i]), bool(conv[i]),
        ))
    return peaks


def write_peaks_csv(peaks: list[PeakRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PEAK_COLUMNS)
        for p in peaks:
            w.writerow([repr(x) if isinstance(x, float) else x for x in p.row()])


def write_peaks_json(peaks: list[PeakRecord], path) -> None:
    rows = [dict(zip(PEAK_COLUMNS, p.row())) for p in peaks]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=1)
        fh.write("\n")


def peak_record(miller: Iterable[int], h: Sequence[complex] = (1, 1, 1), tol: float = DEFAULT_TOL) -> PeakRecord:
    wn = wave_number(miller)
    A = amplitudes(wn.miller, tol=tol)
    I = float(abs(np.dot(np.asarray(h, dtype=complex), A)) ** 2)
    return PeakRecord(wn.miller, wn.k, tuple(complex(x) for x in A), I)
