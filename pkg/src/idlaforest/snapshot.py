"""Versioned binary snapshot of a simulation run.

Byte layout (little-endian; full description in docs/formats.md):

    magic   b"IDLF"
    version u16
    sections, each: id u8 | payload length uvarint | payload
        0x01 CONFIG  canonical "key=value" utf-8 lines, keys sorted
        0x02 SITES   uvarint count, then per site d zigzag varints
                     (first site absolute, the rest deltas in insertion order)
        0x03 EDGES   per site one uvarint: 0 for a root, else parent
                     insertion index + 1
        0x04 TRACES  uvarint count, then per trace: source as d zigzag
                     varints, particle index uvarint, time as raw float64,
                     steps uvarint, radius uvarint
    checksum: 8-byte blake2b of everything before it

Aggregates reach 10^6+ sites, hence delta-coded varints instead of text;
JSONL stays the analysis interchange format.  Loading verifies the checksum
before anything is parsed, so truncation or tampering surfaces as
ChecksumMismatch rather than a parse error.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from .engine import (DEFAULT_STEP_BUDGET, MODE_LEVEL_ORDERED,
                     MODE_SINGLE_SOURCE, MODE_TIME_ORDERED, run_build,
                     run_ordered_build, run_single_source_build)
from .errors import ChecksumMismatch, ConfigError, IoError, SchemaVersionMismatch
from .lattice import sources_in_ball

MAGIC = b"IDLF"
SCHEMA_VERSION = 1

_SEC_CONFIG = 0x01
_SEC_SITES = 0x02
_SEC_EDGES = 0x03
_SEC_TRACES = 0x04


def _write_uvarint(buf: bytearray, v: int) -> None:
    if v < 0:
        raise ValueError("uvarint cannot encode negatives")
    while True:
        b = v & 0x7F
        v >>= 7
        buf.append(b | (0x80 if v else 0))
        if not v:
            break


def _zigzag(v: int) -> int:
    return (v << 1) if v >= 0 else ((-v << 1) - 1)


def _unzigzag(u: int) -> int:
    return (u >> 1) if (u & 1) == 0 else -((u + 1) >> 1)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ChecksumMismatch("snapshot payload shorter than declared")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def uvarint(self) -> int:
        shift = 0
        out = 0
        while True:
            b = self.take(1)[0]
            out |= (b & 0x7F) << shift
            if not (b & 0x80):
                return out
            shift += 7

    def svarint(self) -> int:
        return _unzigzag(self.uvarint())

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.data)


@dataclass(frozen=True)
class TraceDigest:
    source: tuple
    particle_index: int
    time: float
    steps: int
    radius: int


@dataclass
class SnapshotState:
    """Decoded snapshot: config echo, insertion-ordered sites, parent
    indices (-1 for roots) and per-particle trace digests."""

    schema_version: int
    config: dict
    sites: list
    parents: list
    traces: list = field(default_factory=list)

    def roots(self):
        return [s for s, p in zip(self.sites, self.parents) if p < 0]

    def edges(self):
        return [(self.sites[p], s)
                for s, p in zip(self.sites, self.parents) if p >= 0]


_CONFIG_KEYS = ("mode", "d", "M", "n", "count", "seed", "step_budget")


def _canonical_config(config: dict) -> dict:
    out = {}
    for k in sorted(config):
        if k not in _CONFIG_KEYS:
            raise ConfigError(f"unknown snapshot config key {k!r}")
        out[k] = config[k]
    return out


def snapshot_from_build(config: dict, builder) -> SnapshotState:
    config = _canonical_config(config)
    aggregate = builder.aggregate()
    parents = []
    for site in aggregate.sites:
        edge = builder.parent_edge.get(site)
        parents.append(-1 if edge is None else aggregate.index_of(edge[0]))
    traces = [TraceDigest(t.emission.source, t.emission.particle_index,
                          t.emission.time, t.steps_taken, t.radius)
              for t in builder.traces]
    return SnapshotState(SCHEMA_VERSION, config, list(aggregate.sites),
                         parents, traces)


def serialize(state: SnapshotState) -> bytes:
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<H", state.schema_version)

    def section(sec_id: int, payload: bytes) -> None:
        buf.append(sec_id)
        _write_uvarint(buf, len(payload))
        buf.extend(payload)

    cfg_text = "".join(f"{k}={state.config[k]}\n" for k in sorted(state.config))
    section(_SEC_CONFIG, cfg_text.encode("utf-8"))

    sites = bytearray()
    _write_uvarint(sites, len(state.sites))
    prev = None
    for s in state.sites:
        base = prev if prev is not None else (0,) * len(s)
        for a, b in zip(s, base):
            _write_uvarint(sites, _zigzag(a - b))
        prev = s
    section(_SEC_SITES, bytes(sites))

    edges = bytearray()
    for p in state.parents:
        _write_uvarint(edges, 0 if p < 0 else p + 1)
    section(_SEC_EDGES, bytes(edges))

    traces = bytearray()
    _write_uvarint(traces, len(state.traces))
    for t in state.traces:
        for c in t.source:
            _write_uvarint(traces, _zigzag(c))
        _write_uvarint(traces, t.particle_index)
        traces += struct.pack("<d", t.time)
        _write_uvarint(traces, t.steps)
        _write_uvarint(traces, t.radius)
    section(_SEC_TRACES, bytes(traces))

    buf += hashlib.blake2b(bytes(buf), digest_size=8).digest()
    return bytes(buf)


def deserialize(data: bytes) -> SnapshotState:
    if len(data) < len(MAGIC) + 2 + 8:
        raise ChecksumMismatch("snapshot too short")
    body, digest = data[:-8], data[-8:]
    if hashlib.blake2b(body, digest_size=8).digest() != digest:
        raise ChecksumMismatch("snapshot checksum does not match payload")
    if body[:4] != MAGIC:
        raise SchemaVersionMismatch("not a snapshot file (bad magic)")
    (version,) = struct.unpack("<H", body[4:6])
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"snapshot schema {version}, supported {SCHEMA_VERSION}")
    r = _Reader(body[6:])
    config = {}
    sites = []
    parents = []
    traces = []
    d = None
    while not r.exhausted:
        sec_id = r.take(1)[0]
        length = r.uvarint()
        payload = _Reader(r.take(length))
        if sec_id == _SEC_CONFIG:
            for line in payload.data.decode("utf-8").splitlines():
                k, _, v = line.partition("=")
                config[k] = v
            d = int(config["d"])
        elif sec_id == _SEC_SITES:
            if d is None:
                raise SchemaVersionMismatch("SITES section before CONFIG")
            count = payload.uvarint()
            prev = (0,) * d
            for _ in range(count):
                s = tuple(payload.svarint() + prev[a] for a in range(d))
                sites.append(s)
                prev = s
        elif sec_id == _SEC_EDGES:
            for _ in range(len(sites)):
                parents.append(payload.uvarint() - 1)
        elif sec_id == _SEC_TRACES:
            count = payload.uvarint()
            for _ in range(count):
                src = tuple(payload.svarint() for _ in range(d))
                j = payload.uvarint()
                (t,) = struct.unpack("<d", payload.take(8))
                steps = payload.uvarint()
                radius = payload.uvarint()
                traces.append(TraceDigest(src, j, t, steps, radius))
        # unknown sections are skipped (forward compatibility within a schema)
    return SnapshotState(version, config, sites, parents, traces)


def save_snapshot(state: SnapshotState, path: str) -> None:
    data = serialize(state)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(f"cannot write snapshot {path}: {exc}") from exc


def load_snapshot(path: str) -> SnapshotState:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read snapshot {path}: {exc}") from exc
    return deserialize(data)


def replay_from_config(config: dict) -> SnapshotState:
    """Re-run the simulation a snapshot's config describes."""
    mode = config["mode"]
    d = int(config["d"])
    seed = int(config["seed"], 0) if isinstance(config["seed"], str) \
        else int(config["seed"])
    budget = int(config.get("step_budget", DEFAULT_STEP_BUDGET))
    if mode == MODE_TIME_ORDERED:
        M = int(config["M"])
        n = float(config["n"])
        builder = run_build(seed, sources_in_ball((0,) * d, M), n, d, budget)
    elif mode == MODE_LEVEL_ORDERED:
        builder = run_ordered_build(seed, int(config["M"]),
                                    float(config["n"]), d, budget)
    elif mode == MODE_SINGLE_SOURCE:
        builder = run_single_source_build(seed, int(config["count"]), d,
                                          budget)
    else:
        raise ConfigError(f"unknown snapshot mode {mode!r}")
    return snapshot_from_build(config, builder)


def verify_snapshot(path: str) -> None:
    """Checksum, then a fresh replay from the embedded config; raises on
    any mismatch (bit-exactness is the contract)."""
    state = load_snapshot(path)
    fresh = replay_from_config(state.config)
    if serialize(fresh) != serialize(state):
        raise ChecksumMismatch(
            "snapshot does not match a fresh replay of its config")
