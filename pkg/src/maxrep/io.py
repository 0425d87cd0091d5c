"""Field CSV files, event-set directories and run manifests."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .extract import ExtremeEventSet
from .grid import Field, Grid

MANIFEST = "manifest.json"


def _fmt(x: float) -> str:
    return repr(float(x))


def format_field_csv(f: Field) -> str:
    g = f.grid
    lines = [
        "# grid: " + " ".join([str(g.ndim)] + [_fmt(v) for v in (*g.lo, *g.hi, *g.step)]),
        f"# kind: {f.kind}",
    ]
    pts = g.points
    vals = f.values.ravel()
    for p, v in zip(pts, vals):
        lines.append(",".join([_fmt(c) for c in p] + [_fmt(v)]))
    return "\n".join(lines) + "\n"


def write_field_csv(path, f: Field) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_field_csv(f))


def parse_field_csv(text: str, source: str = "<string>") -> Field:
    lines = text.splitlines()
    grid = None
    kind = "field"
    rows = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            key = key.strip()
            if key == "grid":
                nums = val.split()
                d = int(nums[0])
                vals = [float(x) for x in nums[1:]]
                if len(vals) != 3 * d:
                    raise ValueError(f"{source}:{n}: grid header needs {3 * d} numbers")
                grid = Grid(tuple(vals[:d]), tuple(vals[d:2 * d]), tuple(vals[2 * d:]))
            elif key == "kind":
                kind = val.strip()
            continue
        if grid is None:
            raise ValueError(f"{source}:{n}: data before grid header")
        parts = line.split(",")
        if len(parts) != grid.ndim + 1:
            raise ValueError(f"{source}:{n}: expected {grid.ndim + 1} columns")
        rows.append(float(parts[-1]))
    if grid is None:
        raise ValueError(f"{source}: missing grid header")
    if len(rows) != grid.size:
        raise ValueError(f"{source}: {len(rows)} rows for a grid of {grid.size} points")
    return Field(grid, np.array(rows), kind=kind)


def read_field_csv(path) -> Field:
    with open(path) as fh:
        return parse_field_csv(fh.read(), str(path))


def write_table_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in r) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: Optional[int]
    version: str
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def write(self, directory) -> Path:
        p = Path(directory) / MANIFEST
        write_json(p, asdict(self))
        return p

    @classmethod
    def read(cls, directory) -> "RunManifest":
        d = read_json(Path(directory) / MANIFEST)
        return cls(**d)


def prepare_output_dir(path) -> Path:
    """Create ``path``; refuses to mix outputs with an earlier run's manifest."""
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    if (p / MANIFEST).exists():
        raise FileExistsError(f"{p} already holds a run; choose an empty directory")
    return p


def write_fields(directory, fields, prefix: str) -> list[str]:
    names = []
    for i, f in enumerate(fields):
        name = f"{prefix}-{i}.csv"
        write_field_csv(os.path.join(directory, name), f)
        names.append(name)
    return names


def read_replicates(directory) -> tuple[np.ndarray, Grid, RunManifest]:
    """Load ``rep-<i>.csv`` files listed in a simulation manifest."""
    man = RunManifest.read(directory)
    names = [n for n in man.outputs if n.startswith("rep-") and n.endswith(".csv")]
    if not names:
        raise ValueError(f"{directory}: manifest lists no replicate files")
    fields = [read_field_csv(Path(directory) / n) for n in names]
    grid = fields[0].grid
    return np.stack([f.values for f in fields]), grid, man


def write_event_set(directory, ev: ExtremeEventSet) -> tuple[list[str], dict]:
    """Sample files plus the event metadata to be stored in the manifest."""
    names = write_fields(directory, ev.fields, "sample")
    meta = {
        "kind": ev.kind,
        "grid": ev.grid.spec(),
        "threshold": ev.threshold,
        "selection": ev.selection.tolist(),
        "exceedances": [float(x) for x in ev.exceedances],
        "anchor": ev.anchor,
        "dropped": ev.dropped,
    }
    return names, meta


def read_event_set(directory) -> ExtremeEventSet:
    man = RunManifest.read(directory)
    meta = man.info.get("events")
    if meta is None:
        raise ValueError(f"{directory}: not an event-set directory")
    grid = Grid.parse(meta["grid"])
    names = [n for n in man.outputs if n.startswith("sample-") and n.endswith(".csv")]
    samples = np.stack([read_field_csv(Path(directory) / n).values for n in names]) if names \
        else np.empty((0,) + grid.shape)
    return ExtremeEventSet(meta["kind"], grid, samples, np.asarray(meta["exceedances"]),
                           np.asarray(meta["selection"], dtype=np.int64), meta["threshold"],
                           meta["anchor"], meta["dropped"])


def read_samples(directory) -> tuple[np.ndarray, Grid]:
    """Load ``sample-<i>.csv`` files of any run directory."""
    man = RunManifest.read(directory)
    names = [n for n in man.outputs if n.startswith("sample-") and n.endswith(".csv")]
    if not names:
        raise ValueError(f"{directory}: no sample files")
    fields = [read_field_csv(Path(directory) / n) for n in names]
    return np.stack([f.values for f in fields]), fields[0].grid
