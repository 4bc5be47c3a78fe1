"""Exception types shared across the package.

Everything raised on purpose derives from IdlaError so the CLI can map
checked failures to exit status 1 while genuine bugs still surface as
ordinary tracebacks.
"""


class IdlaError(Exception):
    """Base class for all checked errors."""


class CoordinateOverflowError(IdlaError):
    """A lattice coordinate left the supported fixed-width integer range."""


class UnsupportedDimension(IdlaError):
    """Requested dimension outside the supported range."""


class StepBudgetExceeded(IdlaError):
    """A particle walk exceeded the configured step budget."""

    def __init__(self, budget, source=None, particle_index=None):
        self.budget = budget
        self.source = source
        self.particle_index = particle_index
        msg = f"walk exceeded step budget {budget}"
        if source is not None:
            msg += f" (source={source}, j={particle_index})"
        super().__init__(msg)


class AuditViolation(IdlaError):
    """A replay-time invariant audit failed (implementation bug)."""


class ConfigError(IdlaError):
    """Malformed configuration file or invalid parameter combination."""


class SnapshotError(IdlaError):
    """Base class for snapshot persistence failures."""


class IoError(SnapshotError):
    """Filesystem-level failure while reading or writing a snapshot."""


class SchemaVersionMismatch(SnapshotError):
    """Snapshot was written with an incompatible schema version."""


class ChecksumMismatch(SnapshotError):
    """Snapshot payload does not match its trailing checksum."""
