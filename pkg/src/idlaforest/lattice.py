"""Geometry of Z^d, the source hyperplane, strips, hyperplane balls and cones.

Sites are plain tuples of Python ints, coordinate 0 being the off-hyperplane
axis.  Sources live on the hyperplane {0} x Z^(d-1).  All predicates here are
pure functions; the cone test is carried out in exact integer arithmetic so
boundary sites are classified without floating-point ambiguity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CoordinateOverflowError, UnsupportedDimension

Site = tuple  # tuple[int, ...]; length = dimension d
Source = tuple  # Site with first coordinate 0

MIN_DIM = 2
MAX_DIM = 4
# Fixed-width signed 64-bit storage with headroom for one addition.
COORD_LIMIT = 2**62


def check_site(s: Site) -> Site:
    """Validate dimension and coordinate range, returning the site unchanged."""
    d = len(s)
    if not (MIN_DIM <= d <= MAX_DIM):
        raise UnsupportedDimension(f"dimension {d} outside [{MIN_DIM}, {MAX_DIM}]")
    for c in s:
        if not -COORD_LIMIT < c < COORD_LIMIT:
            raise CoordinateOverflowError(f"coordinate {c} out of range")
    return s


def is_source(s: Site) -> bool:
    return s[0] == 0


def inf_norm(s: Site) -> int:
    """Max of absolute coordinates."""
    return max(abs(c) for c in s)


def project_to_hyperplane(s: Site) -> Source:
    """Orthogonal projection: zero the first coordinate."""
    return (0,) + tuple(s[1:])


def in_strip(s: Site, K: int) -> bool:
    """True iff every coordinate except the first has absolute value <= K."""
    return all(abs(c) <= K for c in s[1:])


def hball_overlap(z1: Source, r1: int, z2: Source, r2: int) -> bool:
    """Do the hyperplane balls z1 + H_r1 and z2 + H_r2 share a site?

    Hyperplane balls are axis-aligned cubes under the infinity norm, so the
    cubes intersect exactly when every coordinate interval overlaps, i.e.
    inf_norm(z1 - z2) <= r1 + r2.
    """
    if r1 < 0 or r2 < 0:
        raise ValueError("radii must be non-negative")
    gap = max(abs(a - b) for a, b in zip(z1, z2))
    return gap <= r1 + r2


def translate(s: Site, k: Source) -> Site:
    """Componentwise sum with checked overflow."""
    out = tuple(a + b for a, b in zip(s, k))
    for c in out:
        if not -COORD_LIMIT < c < COORD_LIMIT:
            raise CoordinateOverflowError(f"translated coordinate {c} out of range")
    return out


def integer_nth_root(x: int, n: int) -> int:
    """Largest r >= 0 with r**n <= x, for x >= 0, n >= 1 (exact)."""
    if x < 0:
        raise ValueError("x must be non-negative")
    if n == 1 or x in (0, 1):
        return x
    r = int(round(x ** (1.0 / n)))
    # Float seed, then exact correction.
    while r > 0 and r**n > x:
        r -= 1
    while (r + 1) ** n <= x:
        r += 1
    return r


@dataclass(frozen=True)
class ConeSpec:
    """Cone |z_1| <= epsilon * l**alpha with l the projected infinity norm.

    epsilon and alpha are kept as exact rationals; membership reduces to an
    integer comparison (see cone_contains), which matters because boundary
    sites decide the overflow-event statistics.
    """

    epsilon: Fraction
    alpha: Fraction

    def __post_init__(self):
        eps = Fraction(self.epsilon)
        alpha = Fraction(self.alpha)
        if eps <= 0:
            raise ValueError("epsilon must be positive")
        if not (0 < alpha < 1):
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "alpha", alpha)

    def max_offset(self, level: int) -> int:
        """Largest |z_1| admitted at projected distance `level` (exact)."""
        if level < 0:
            raise ValueError("level must be non-negative")
        p, q = self.alpha.numerator, self.alpha.denominator
        a, b = self.epsilon.numerator, self.epsilon.denominator
        # m <= (a/b) * level**(p/q)  <=>  (m*b)**q <= a**q * level**p
        return integer_nth_root(a**q * level**p, q) // b

    def threshold_table(self, max_level: int) -> np.ndarray:
        """int64 table of max_offset for levels 0..max_level (kernel input)."""
        return np.array(
            [self.max_offset(l) for l in range(max_level + 1)], dtype=np.int64
        )


def cone_contains(s: Site, cone: ConeSpec) -> bool:
    """Exact membership test |s_0| <= epsilon * l**alpha."""
    level = inf_norm(project_to_hyperplane(s))
    p, q = cone.alpha.numerator, cone.alpha.denominator
    a, b = cone.epsilon.numerator, cone.epsilon.denominator
    return (abs(s[0]) * b) ** q <= a**q * level**p


def sources_in_ball(center: Source, r: int) -> list:
    """All sources of the hyperplane ball center + H_r, in lexicographic order."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    d = len(center)
    ranges = [range(c - r, c + r + 1) for c in center[1:]]
    out = [(0,) + rest for rest in itertools.product(*ranges)]
    for s in out:
        check_site(s)
    return out


def hyperplane_sphere_size(d: int, r: int) -> int:
    """Number of sources at infinity-norm distance exactly r from the origin."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    if r == 0:
        return 1
    return (2 * r + 1) ** (d - 1) - (2 * r - 1) ** (d - 1)
