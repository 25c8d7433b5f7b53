"""Exact arithmetic in Z[beta] for the plastic number beta (beta^3 = beta + 1).

Elements are stored as integer coordinates with respect to the basis
(1, beta, beta^2).  Two embeddings are provided: the real one (beta itself)
and the star map, which sends beta to its complex conjugate alpha
(Im alpha > 0) and splits the result into real and imaginary parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

INT64_MAX = 2**63 - 1
INT64_MIN = -(2**63)


def _refine_root(x: float) -> float:
    # Newton on x^3 - x - 1; quadratic convergence, a few steps reach a fixed point.
    for _ in range(50):
        step = (x * x * x - x - 1.0) / (3.0 * x * x - 1.0)
        x -= step
        if abs(step) < 1e-17:
            break
    return x


def _radical_beta() -> float:
    s69 = math.sqrt(69.0)
    return float((np.cbrt(9.0 + s69) + np.cbrt(9.0 - s69)) / np.cbrt(18.0))


@dataclass(frozen=True)
class Embeddings:
    """Numerical values of beta and of its complex conjugate alpha."""

    beta: float
    alpha_re: float
    alpha_im: float
    alpha2_re: float
    alpha2_im: float

    @classmethod
    def compute(cls) -> "Embeddings":
        b = _refine_root(_radical_beta())
        s23 = math.sqrt(23.0)
        return cls(
            beta=b,
            alpha_re=-b / 2.0,
            alpha_im=(4.0 + 9.0 * b - 6.0 * b * b) / (2.0 * s23),
            alpha2_re=1.0 - b * b / 2.0,
            alpha2_im=(6.0 + 2.0 * b - 9.0 * b * b) / (2.0 * s23),
        )

    @property
    def alpha(self) -> complex:
        return complex(self.alpha_re, self.alpha_im)

    @property
    def alpha_abs2(self) -> float:
        return self.alpha_re**2 + self.alpha_im**2

    @property
    def real_basis(self) -> np.ndarray:
        return np.array([1.0, self.beta, self.beta**2])

    @property
    def star_basis(self) -> np.ndarray:
        """2x3 matrix mapping integer coordinates to the star image."""
        return np.array(
            [[1.0, self.alpha_re, self.alpha2_re], [0.0, self.alpha_im, self.alpha2_im]]
        )

    def contraction_q(self) -> np.ndarray:
        """Multiplication by alpha acting on R^2."""
        return np.array([[self.alpha_re, -self.alpha_im], [self.alpha_im, self.alpha_re]])

    def contraction_r(self) -> np.ndarray:
        """Transpose of ``contraction_q``; the map y -> R y of the cocycle."""
        return self.contraction_q().T

    def basis_matrix(self) -> np.ndarray:
        """Minkowski embedding of the basis 1, beta, beta^2 (as columns)."""
        b = self.beta
        return np.array(
            [
                [1.0, b, b * b],
                [1.0, self.alpha_re, self.alpha2_re],
                [0.0, self.alpha_im, self.alpha2_im],
            ]
        )

    def dual_basis_matrix(self) -> np.ndarray:
        b, im = self.beta, self.alpha_im
        return (2.0 / math.sqrt(23.0)) * np.array(
            [
                [im / b, im * b, im],
                [2.0 * im * b * b, -im * b, -im],
                [b, -1.0 + 1.5 * b * b, -1.5 * b],
            ]
        )


EMB = Embeddings.compute()
BETA = EMB.beta


def _checked(n: int) -> int:
    if not INT64_MIN <= n <= INT64_MAX:
        raise OverflowError(f"Z[beta] coordinate {n} exceeds the 64-bit range")
    return n


@dataclass(frozen=True, order=True)
class BetaInt:
    """The element n0 + n1*beta + n2*beta^2 of Z[beta]."""

    n0: int = 0
    n1: int = 0
    n2: int = 0

    def __post_init__(self):
        for name in ("n0", "n1", "n2"):
            value = getattr(self, name)
            object.__setattr__(self, name, _checked(int(value)))

    @classmethod
    def of(cls, x: "BetaInt | int | Iterable[int]") -> "BetaInt":
        if isinstance(x, BetaInt):
            return x
        if isinstance(x, (int, np.integer)):
            return cls(int(x), 0, 0)
        return cls(*x)

    @property
    def coords(self) -> tuple[int, int, int]:
        return (self.n0, self.n1, self.n2)

    def __iter__(self):
        return iter(self.coords)

    def __add__(self, other):
        o = BetaInt.of(other)
        return BetaInt(self.n0 + o.n0, self.n1 + o.n1, self.n2 + o.n2)

    __radd__ = __add__

    def __neg__(self):
        return BetaInt(-self.n0, -self.n1, -self.n2)

    def __sub__(self, other):
        return self + (-BetaInt.of(other))

    def __rsub__(self, other):
        return BetaInt.of(other) - self

    def __mul__(self, other):
        return beta_mul(self, BetaInt.of(other))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative powers are not supported")
        result, base = BetaInt(1), self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def real(self) -> float:
        return real_embed(self)

    def star(self) -> tuple[float, float]:
        return star_map(self)

    def __repr__(self):
        return f"BetaInt({self.n0}, {self.n1}, {self.n2})"


ONE = BetaInt(1, 0, 0)
BETA_ELT = BetaInt(0, 1, 0)


def beta_mul(x: BetaInt, y: BetaInt) -> BetaInt:
    """Product in Z[beta], reduced with beta^3 = 1 + beta and beta^4 = beta + beta^2.

    Raises OverflowError if a coordinate of the result leaves the int64 range.
    """
    a0, a1, a2 = x.coords
    b0, b1, b2 = y.coords
    c0 = a0 * b0
    c1 = a0 * b1 + a1 * b0
    c2 = a0 * b2 + a1 * b1 + a2 * b0
    c3 = a1 * b2 + a2 * b1
    c4 = a2 * b2
    return BetaInt(c0 + c3, c1 + c3 + c4, c2 + c4)


def beta_power(m: int) -> BetaInt:
    """beta^m as an element of Z[beta] (m >= 0)."""
    return BETA_ELT**m


def real_embed(x: BetaInt | Iterable[int]) -> float:
    n0, n1, n2 = BetaInt.of(x).coords
    b = EMB.beta
    # Horner form keeps the rounding of large coordinates symmetric.
    return n0 + b * (n1 + b * n2)


def star_map(x: BetaInt | Iterable[int]) -> tuple[float, float]:
    n0, n1, n2 = BetaInt.of(x).coords
    e = EMB
    return (n0 + n1 * e.alpha_re + n2 * e.alpha2_re, n1 * e.alpha_im + n2 * e.alpha2_im)


def conjugate(x: BetaInt | Iterable[int]) -> complex:
    """sigma(x): the image of x under beta -> alpha, as a complex number."""
    re, im = star_map(x)
    return complex(re, im)


# -- vectorised helpers over (N, 3) int64 coordinate arrays -------------------

def _check_headroom(n: np.ndarray, factor: int = 2) -> None:
    if n.size and int(np.abs(n).max()) > INT64_MAX // (factor + 1):
        raise OverflowError("Z[beta] coordinates too large for int64 arithmetic")


def times_beta(n: np.ndarray) -> np.ndarray:
    """Multiply each row n0 + n1 b + n2 b^2 by beta exactly."""
    n = np.asarray(n, dtype=np.int64)
    _check_headroom(n)
    out = np.empty_like(n)
    out[:, 0] = n[:, 2]
    out[:, 1] = n[:, 0] + n[:, 2]
    out[:, 2] = n[:, 1]
    return out


def mul_array(n: np.ndarray, x: BetaInt) -> np.ndarray:
    """Multiply each row of ``n`` by the fixed element ``x`` exactly."""
    n = np.asarray(n, dtype=np.int64)
    bound = max(abs(c) for c in x.coords) * 5 + 1
    if n.size and int(np.abs(n).max()) > INT64_MAX // bound:
        raise OverflowError("Z[beta] coordinates too large for int64 arithmetic")
    b0, b1, b2 = x.coords
    a0, a1, a2 = n[:, 0], n[:, 1], n[:, 2]
    c3 = a1 * b2 + a2 * b1
    c4 = a2 * b2
    return np.stack(
        [a0 * b0 + c3, a0 * b1 + a1 * b0 + c3 + c4, a0 * b2 + a1 * b1 + a2 * b0 + c4],
        axis=1,
    )


def real_embed_array(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n)
    b = EMB.beta
    return n[:, 0] + b * (n[:, 1] + b * n[:, 2])


def star_array(n: np.ndarray) -> np.ndarray:
    """Star images of the rows of ``n`` as an (N, 2) float array."""
    n = np.asarray(n, dtype=np.float64)
    return n @ EMB.star_basis.T


@dataclass(frozen=True)
class WaveNumber:
    """A point of the Fourier module.

    ``kstar`` is the star image of k.  ``kdual`` is the internal part of the
    dual-lattice vector (k, kdual), i.e. the vector paired with x* in
    k x + <kdual, x*> = Tr(k x), an integer for every x in Z[beta].  Window
    transforms must be sampled at ``kdual``; as a complex number it equals
    2 conj(sigma(k)).
    """

    miller: tuple[int, int, int]
    k: float
    kstar: tuple[float, float]
    kdual: tuple[float, float]


# (5 - 6 beta + 4 beta^2) / 23 generates the Fourier module over Z[beta].
MODULE_GENERATOR = BetaInt(5, -6, 4)
MODULE_DENOMINATOR = 23


def kstar_closed_form(miller: Iterable[int]) -> tuple[float, float]:
    n0, n1, n2 = (int(c) for c in miller)
    b = EMB.beta
    x = ((18 * n0 - 4 * n1 + 6 * n2) + (6 * n0 - 9 * n1 + 2 * n2) * b
         - (4 * n0 - 6 * n1 + 9 * n2) * b * b) / 46.0
    y = (2 * n2 + (3 * n1 - 2 * n0) * b - 3 * n2 * b * b) / (2.0 * math.sqrt(23.0))
    return (x, y)


def kstar_product_route(miller: Iterable[int]) -> tuple[float, float]:
    """k* via the exact product (5 - 6b + 4b^2) * miller, then the star map."""
    p = MODULE_GENERATOR * BetaInt.of(tuple(miller))
    re, im = star_map(p)
    return (re / MODULE_DENOMINATOR, im / MODULE_DENOMINATOR)


def wave_number(miller: Iterable[int]) -> WaveNumber:
    m = tuple(int(c) for c in miller)
    if len(m) != 3:
        raise ValueError("Miller index must be a triple")
    k = real_embed(MODULE_GENERATOR * BetaInt.of(m)) / MODULE_DENOMINATOR
    ks = kstar_closed_form(m)
    return WaveNumber(m, k, ks, dual_internal(ks))


def dual_internal(kstar: tuple[float, float]) -> tuple[float, float]:
    """Map a star image k* to the dual-lattice internal coordinate (2 Re, -2 Im)."""
    return (2.0 * kstar[0], -2.0 * kstar[1])


def wave_numbers_array(miller: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (k, kdual) for an (N, 3) integer array of Miller triples."""
    miller = np.asarray(miller, dtype=np.int64)
    p = mul_array(miller, MODULE_GENERATOR)
    k = real_embed_array(p) / MODULE_DENOMINATOR
    ks = star_array(p) / MODULE_DENOMINATOR
    return k, ks * np.array([2.0, -2.0])


@dataclass(frozen=True)
class Constants:
    beta: float
    mean_spacing: float
    density: float
    lattice_density: float
    alpha_im: float
    volumes: tuple[float, float, float]
    module_generator: float


def constants() -> Constants:
    """Derived scalars; see ``windows.exact_volumes`` for the volume values."""
    b = EMB.beta
    s_bar = real_embed((4, 2, -3))
    dens = real_embed((3, 1, 7)) / 23.0
    im = EMB.alpha_im
    return Constants(
        beta=b,
        mean_spacing=s_bar,
        density=dens,
        lattice_density=2.0 / math.sqrt(23.0),
        alpha_im=im,
        volumes=(im * (b * b - 1.0), im * b, im),
        module_generator=real_embed(MODULE_GENERATOR) / MODULE_DENOMINATOR,
    )
