"""CSV/JSON writers and the run manifest that accompanies every output set."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

#: Environment variable naming the default output directory.
OUT_ENV = "NVMEM_OUT"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "nvmem_out"))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header, rows, comment: str | None = None) -> Path:
    """Comma-separated, UTF-8, LF line endings, one header row.

    ``comment`` is written first as a ``#`` line.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def read_csv(path):
    """Return (header, float array) from a CSV written by :func:`write_csv`."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [l for l in fh if not l.startswith("#") and l.strip()]
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    return header, data.reshape(-1, len(header))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(o):
    # NaN/inf are not valid JSON; store them as null
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, (float, np.floating)) and not np.isfinite(o):
        return None
    return o


def write_json(path, obj) -> Path:
    """UTF-8 JSON with sorted keys; non-finite numbers become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_finite(obj), sort_keys=True, indent=2, default=_jsonable, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


@dataclass
class RunManifest:
    command: str
    scenario_hash: str
    seed: int
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    tool_version: str = __version__
    wall_time_s: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self, out_dir) -> Path:
        self.wall_time_s = time.perf_counter() - self._t0
        d = {k: v for k, v in asdict(self).items() if not k.startswith("_")}
        d["outputs"] = sorted(d["outputs"])
        return write_json(Path(out_dir) / "manifest.json", d)
