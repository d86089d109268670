"""Binary value-function files, run configuration, and trace/summary export."""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grid_hj import Grid3, RelDynParams, ValueField

MAGIC = b"BRS1"
# magic, dims (3 x u32), min corner, max corner, (v, wbar, R_c) as f64, periodic flags
_HEADER = struct.Struct("<4s3I3d3d3d3B")
# optional trailer after the values; readers of the plain layout can ignore it
_TRAILER = struct.Struct("<4s?d")
_TRAILER_MAGIC = b"CONV"


class BrsFormatError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def save_brs(field: ValueField, path) -> None:
    g = field.grid
    p = field.params
    header = _HEADER.pack(MAGIC, *g.dims, *g.min_corner, *g.max_corner,
                          p.speed, p.max_turn_rate, field.capture_radius, *g.periodic)
    body = np.asarray(field.values, dtype="<f8").ravel(order="F").tobytes()
    trailer = _TRAILER.pack(_TRAILER_MAGIC, bool(field.converged), float(field.convergence_residual))
    Path(path).write_bytes(header + body + trailer)


def load_brs(path) -> ValueField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise BrsFormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    fields = _HEADER.unpack_from(data)
    if fields[0] != MAGIC:
        raise BrsFormatError(f"{path}: bad magic {fields[0]!r}, expected {MAGIC!r}")
    dims = fields[1:4]
    lo, hi = fields[4:7], fields[7:10]
    v, wbar, rc = fields[10:13]
    periodic = tuple(bool(b) for b in fields[13:16])
    n = int(np.prod(dims))
    end = _HEADER.size + 8 * n
    if len(data) < end:
        raise BrsFormatError(f"{path}: expected {n} values, file truncated at {len(data)} bytes")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=_HEADER.size)
    if not np.all(np.isfinite(values)):
        raise BrsFormatError(f"{path}: non-finite values in body")
    converged, residual = True, 0.0
    if len(data) == end + _TRAILER.size and data[end:end + 4] == _TRAILER_MAGIC:
        _, converged, residual = _TRAILER.unpack_from(data, end)
    elif len(data) != end:
        raise BrsFormatError(f"{path}: {len(data) - end} unexpected bytes after the values")
    try:
        grid = Grid3(dims, lo, hi, periodic)
        params = RelDynParams(v, wbar)
    except ValueError as exc:
        raise BrsFormatError(f"{path}: invalid header ({exc})") from exc
    return ValueField(grid, values.reshape(dims, order="F").copy(), converged=converged,
                      convergence_residual=residual, capture_radius=rc, params=params)


@dataclass
class RunConfig:
    """Every physical and numerical constant of a run.

    Defaults: 101x101x120 grid over [-25, 25]^2 x [0, 2pi), v=5, wbar=1, R_c=5,
    K=1.5, dt=0.05, t_max=30, goal radius 1, violation margin 0.
    """

    grid_dims: tuple = (101, 101, 120)
    grid_min: tuple = (-25.0, -25.0, 0.0)
    grid_max: tuple = (25.0, 25.0, 2 * np.pi)
    speed: float = 5.0
    max_turn_rate: float = 1.0
    capture_radius: float = 5.0
    K: float = 1.5
    tolerance: float = 1e-3
    max_iterations: int = 20000
    dt: float = 0.05
    t_max: float = 30.0
    goal_radius: float = 1.0
    violation_margin: float = 0.0
    method: str = "mip"
    N: int = 3
    batch_N: tuple = (3, 4, 5, 6, 7, 8)
    trials: int = 200
    seed: int = 0
    perturbation: tuple = (1.0, 0.2)
    output_dir: str = "out"
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        positive = ("speed", "max_turn_rate", "capture_radius", "tolerance", "dt", "t_max",
                    "goal_radius")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.method not in ("mip", "samv", "baseline"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.N < 2 or self.trials < 1:
            raise ConfigError("N must be >= 2 and trials >= 1")
        if self.violation_margin < 0 or self.violation_margin >= self.capture_radius:
            raise ConfigError("violation_margin must lie in [0, capture_radius)")
        try:
            self.grid()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__ and k != "extra"}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k in ("grid_dims", "grid_min", "grid_max", "batch_N", "perturbation"):
            if k in known:
                known[k] = tuple(known[k])
        try:
            return cls(**known)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d

    def grid(self) -> Grid3:
        return Grid3(self.grid_dims, self.grid_min, self.grid_max)

    def params(self) -> RelDynParams:
        return RelDynParams(self.speed, self.max_turn_rate)

    @property
    def violation_radius(self) -> float:
        return self.capture_radius - self.violation_margin


def trace_header(n: int) -> list[str]:
    cols = ["time"]
    for i in range(n):
        cols += [f"x{i}", f"y{i}", f"theta{i}", f"reached{i}", f"omega{i}", f"avoid{i}"]
    return cols


def write_trace(trace, path) -> None:
    n = len(trace[0].states)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(n))
        for rec in trace:
            row = [f"{rec.time:.6f}"]
            for i in range(n):
                x, y, th, reached = rec.states[i]
                hit = np.nonzero(rec.assignment[i])[0]
                w_i = rec.controls[i]
                row += [repr(float(x)), repr(float(y)), repr(float(th)), int(reached),
                        "" if np.isnan(w_i) else repr(float(w_i)),
                        int(hit[0]) if len(hit) else -1]
            w.writerow(row)


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_metrics(metrics, path) -> None:
    Path(path).write_text(json.dumps(asdict(metrics), indent=2))


SUMMARY_COLUMNS = ["N", "method", "success_ratio", "conflict_ratio", "trials", "completed", "base_seed"]


def write_summary(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r["N"], r["method"], f"{r['success_ratio']:.6f}", f"{r['conflict_ratio']:.6f}",
                        r["trials"], r["completed"], r["base_seed"]])
