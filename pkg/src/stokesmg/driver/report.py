"""CSV and JSON emission of experiment results."""

import csv
import io
import json

import numpy as np

SCHEMA_VERSION = 1

# columns that only go into JSON documents
_JSON_ONLY = ("residual_history", "eigenvalues")


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def _columns(rows):
    cols = []
    for row in rows:
        for key in row:
            if key not in cols and key not in _JSON_ONLY:
                cols.append(key)
    return cols


def to_csv(result):
    buf = io.StringIO()
    cols = _columns(result.rows)
    writer = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for row in result.rows:
        writer.writerow({k: ("" if row.get(k) is None else _plain(row.get(k)))
                         for k in cols})
    return buf.getvalue()


def to_json(result, config):
    settings = config.as_dict()
    settings.pop("out")  # where the document goes is not part of the run
    doc = {"schema_version": SCHEMA_VERSION,
           "experiment": result.kind,
           "config": _plain(settings),
           "ok": result.ok,
           "failures": list(result.failures),
           "rows": _plain(result.rows)}
    return json.dumps(doc, indent=2) + "\n"


def render(result, config):
    if config.format == "json":
        return to_json(result, config)
    return to_csv(result)
