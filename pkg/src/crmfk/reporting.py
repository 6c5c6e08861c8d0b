"""Run manifests, config files, and delimited output for the commands.

Every command writes its tables through the helpers here so that two
runs with equal resolved options emit byte-identical files, and drops
a manifest next to its outputs from which the run can be repeated.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, asdict
from datetime import datetime, timezone

import numpy as np

__all__ = ["RunManifest", "fmt_value", "rows_to_csv", "rows_to_json",
           "load_config_section", "manifest_filename"]


def fmt_value(x) -> str:
    """Column formatting: floats as their shortest round-trip form."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _native(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def rows_to_csv(header: str, rows) -> str:
    lines = [header]
    width = len(header.split(","))
    for row in rows:
        if len(row) != width:
            raise ValueError(f"row width {len(row)} != header width {width}")
        lines.append(",".join(fmt_value(v) for v in row))
    return "\n".join(lines) + "\n"


def rows_to_json(header: str, rows) -> str:
    """The JSON mirror of a CSV table: a list of column-keyed records."""
    cols = header.split(",")
    records = []
    for row in rows:
        if len(row) != len(cols):
            raise ValueError(f"row width {len(row)} != header width {len(cols)}")
        records.append({c: _native(v) for c, v in zip(cols, row)})
    return json.dumps(records, indent=2) + "\n"


def manifest_filename(command: str) -> str:
    return f"{command}-manifest.json"


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to repeat a command invocation.

    ``options`` is the fully resolved option set (defaults, config
    file, and flags already merged), so a rerun bypasses parsing and
    must reproduce every listed output byte for byte.
    """

    command: str
    options: dict
    master_seed: int | None
    version: str
    outputs: tuple
    wall_clock_seconds: float
    created_utc: str

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def write(self, path) -> None:
        payload = asdict(self)
        payload["outputs"] = list(self.outputs)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def read(path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        required = {"command", "options", "master_seed", "version",
                    "outputs", "wall_clock_seconds", "created_utc"}
        missing = required - payload.keys()
        if missing:
            raise ValueError(f"manifest is missing fields: {sorted(missing)}")
        payload["outputs"] = tuple(payload["outputs"])
        return RunManifest(**{k: payload[k] for k in required})


def load_config_section(path, section: str) -> dict:
    """Flat key-value pairs from one section of an INI-style file.

    A missing section is an empty mapping; a missing file is an error
    (the caller asked for it explicitly).
    """
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section(section):
        return {}
    return dict(parser.items(section))
