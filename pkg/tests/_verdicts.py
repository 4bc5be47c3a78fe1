"""Registry for acceptance verdict lines, re-emitted by the conftest hook."""

ACCEPTANCE_VERDICTS = []


def record_verdict(line: str) -> None:
    ACCEPTANCE_VERDICTS.append(line)
