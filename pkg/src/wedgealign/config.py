"""Flat TOML config files and reproducibility records for CLI runs."""

from __future__ import annotations

import json
import platform
from pathlib import Path
from typing import Any


def parse_flat_toml(text: str) -> dict[str, Any]:
    """Parse a flat `key = value` TOML subset.

    Supports strings (single or double quoted), integers, floats and
    booleans, one assignment per line, with `#` comments. Tables/arrays are
    rejected; config files mirror scalar CLI flags only.
    """
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            raise ValueError(f"line {lineno}: tables are not supported")
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ValueError(f"line {lineno}: expected key = value")
        out[key] = _parse_scalar(value, lineno)
    return out


def _parse_scalar(value: str, lineno: int) -> Any:
    if value[0] in "\"'":
        quote = value[0]
        if len(value) < 2 or not value.endswith(quote):
            raise ValueError(f"line {lineno}: unterminated string")
        return value[1:-1]
    # Strip a trailing comment from bare scalars.
    value = value.split("#", 1)[0].strip()
    if value == "true":
        return True
    if value == "false":
        return False
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"line {lineno}: cannot parse value {value!r}") from None


def load_config_file(path: str | Path) -> dict[str, Any]:
    return parse_flat_toml(Path(path).read_text(encoding="utf-8"))


def write_run_record(out_dir: Path, command: str, config: dict[str, Any]) -> Path:
    """Persist the effective configuration and library versions.

    Output-directory paths are excluded so records (and hence whole output
    trees) are byte-identical across runs with the same seeds.
    """
    import numpy
    import scipy

    from . import __version__

    record = {
        "command": command,
        "config": {k: v for k, v in sorted(config.items()) if k != "out_dir"},
        "versions": {
            "wedgealign": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    path = out_dir / "run_record.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
