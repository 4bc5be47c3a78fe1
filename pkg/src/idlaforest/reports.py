"""JSONL and CSV writers with deterministic bytes.

Every JSONL record carries the schema version and the full config echo; no
record is emitted without its provenance fields.  Floats serialize through
json (shortest round-trip repr), so files are byte-identical across runs
and worker counts.
"""

from __future__ import annotations

import json

SCHEMA_VERSION = 1


def _plain(obj):
    """Recursively convert tuples/sets and numpy scalars to JSON-safe types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_plain(v) for v in obj)
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    return obj


def jsonl_line(record: dict) -> str:
    return json.dumps(_plain(record), sort_keys=True,
                      separators=(",", ":")) + "\n"


def provenance_records(config: dict, kind_payloads) -> list:
    """Attach schema + config echo to an iterable of (kind, payload) pairs."""
    out = []
    for kind, payload in kind_payloads:
        rec = {"schema_version": SCHEMA_VERSION, "config": _plain(config),
               "kind": kind}
        rec.update(_plain(payload))
        out.append(rec)
    return out


def write_jsonl(path: str, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(jsonl_line(rec))


def csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return '"' + " ".join(str(x) for x in v) + '"'
    return str(v)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(csv_cell(v) for v in row) + "\n")


def run_record_lines(record) -> list:
    """RunRecord -> provenance-carrying JSONL records (wall clock excluded)."""
    cfg = record.config.as_dict()
    pairs = [("replicate", rep) if isinstance(rep, dict)
             else ("replicate", {"data": rep}) for rep in record.replicates]
    pairs.append(("summary", record.summary))
    return provenance_records(cfg, pairs)
