"""Counter-based random streams keyed by (master seed, role, source, index).

Every random quantity in a simulation is a pure function of its stream key
and a counter, so two runs that share a master seed read *identical* clock
tops and walk steps for every source they have in common, regardless of the
window size.  That property is what makes the couplings hold by construction.

The generator is the splitmix64 finalizer applied to a per-key 128-bit state:

    value(i) = mix64(k0 ^ mix64(k1 + i * GOLDEN))

Random access by counter is O(1); there is no global RNG state anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .lattice import Site, Source, check_site

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

CLOCK = "clock"
WALK = "walk"
_TAG_SALT = {CLOCK: 0x636C6F636B5F3031, WALK: 0x77616C6B5F5F3031}
_LANE_SALT = 0xD1B54A32D192ED03
_REPLICATE_SALT = 0x8BB84B93962EACC9


def mix64(x: int) -> int:
    """splitmix64 finalizer (Stafford variant 13) on a 64-bit word."""
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def _absorb(h: int, v: int) -> int:
    return mix64((h ^ (v & MASK64)) + GOLDEN)


@dataclass(frozen=True)
class StreamKey:
    """Identity of one random stream plus its derived 128-bit state."""

    master_seed: int
    domain_tag: str
    source: Source
    particle_index: int
    k0: int
    k1: int


def derive_key(master: int, tag: str, z: Source, j: int = 0) -> StreamKey:
    """Derive the stream key for source z and particle index j.

    Clock streams use j == 0; walk streams use the 1-based index of the
    particle within its source's clock.  Signed coordinates are absorbed in
    two's complement so negative levels stay distinct.
    """
    if tag not in _TAG_SALT:
        raise ValueError(f"unknown stream tag {tag!r}")
    if tag == CLOCK and j != 0:
        raise ValueError("clock streams carry particle_index 0")
    if tag == WALK and j < 1:
        raise ValueError("walk streams need particle_index >= 1")
    check_site(z)
    if z[0] != 0:
        raise ValueError("stream keys are derived for sources on the hyperplane")
    h0 = mix64((master & MASK64) ^ _TAG_SALT[tag])
    h1 = mix64(h0 ^ _LANE_SALT)
    h0 = _absorb(h0, len(z))
    h1 = _absorb(h1, len(z) * 0x9E37)
    for c in z:
        h0 = _absorb(h0, c)
        h1 = _absorb(h1, (c * 0x2545F4914F6CDD1D))
    h0 = _absorb(h0, j)
    h1 = _absorb(h1, j * GOLDEN)
    return StreamKey(master & MASK64, tag, tuple(z), j, h0, h1)


def stream_u64(key: StreamKey, i: int) -> int:
    """i-th 64-bit word of the stream (counter access, i >= 0)."""
    return mix64(key.k0 ^ mix64((key.k1 + i * GOLDEN) & MASK64))


def u64_to_unit(v: int) -> float:
    """Map a 64-bit word into the open interval (0, 1).

    (v >> 12) * 2^-52 + 2^-53 spans [2^-53, 1 - 2^-53] on exactly
    representable doubles, so neither endpoint of (0, 1) is ever produced
    (log(0) and zero-length inter-arrivals are both impossible).
    """
    return (v >> 12) * 2.0**-52 + 2.0**-53


@dataclass(frozen=True)
class ClockTops:
    """Strictly increasing Poisson(1) tops of one source's clock in (0, t]."""

    key: StreamKey
    horizon: float
    times: tuple

    def __len__(self):
        return len(self.times)


def clock_tops(key: StreamKey, t: float) -> ClockTops:
    """Tops of the unit-intensity Poisson clock restricted to (0, t].

    Inter-arrival times are Exponential(1) by inversion of consecutive
    stream words; sums are accumulated in order, so for t' >= t the result
    for t is exactly the prefix of the result for t' (prefix stability).
    """
    if key.domain_tag != CLOCK:
        raise ValueError("clock_tops requires a clock stream key")
    if t < 0:
        raise ValueError("horizon must be non-negative")
    times = []
    acc = 0.0
    i = 0
    while True:
        acc += -math.log(u64_to_unit(stream_u64(key, i)))
        if acc > t:
            break
        times.append(acc)
        i += 1
    return ClockTops(key, t, tuple(times))


def first_top(key: StreamKey) -> float:
    """Time of the first top (Exponential(1)); cheap emptiness probe."""
    if key.domain_tag != CLOCK:
        raise ValueError("first_top requires a clock stream key")
    return -math.log(u64_to_unit(stream_u64(key, 0)))


_UNIT_STEPS_CACHE = {}


def unit_steps(d: int):
    """The 2d signed unit vectors in direction-index order.

    Index k maps to axis k // 2 with sign + for even k, - for odd k.
    """
    if d not in _UNIT_STEPS_CACHE:
        steps = []
        for axis in range(d):
            for sign in (1, -1):
                v = [0] * d
                v[axis] = sign
                steps.append(tuple(v))
        _UNIT_STEPS_CACHE[d] = tuple(steps)
    return _UNIT_STEPS_CACHE[d]


class WalkSteps:
    """Random-access view of one particle's simple-random-walk steps."""

    def __init__(self, key: StreamKey):
        if key.domain_tag != WALK:
            raise ValueError("WalkSteps requires a walk stream key")
        self.key = key
        self.d = len(key.source)
        self._steps = unit_steps(self.d)

    def direction(self, i: int) -> int:
        return stream_u64(self.key, i) % (2 * self.d)

    def __getitem__(self, i: int) -> Site:
        return self._steps[self.direction(i)]


def walk_steps(key: StreamKey) -> WalkSteps:
    """Unbounded step sequence of the walk stream; step i is a pure
    function of (key, i)."""
    return WalkSteps(key)


def replicate_seed(master: int, index: int) -> int:
    """Derived master seed for replicate `index` of an experiment."""
    if index < 0:
        raise ValueError("replicate index must be non-negative")
    return mix64(mix64((master & MASK64) ^ _REPLICATE_SALT) + (index + 1) * GOLDEN)
