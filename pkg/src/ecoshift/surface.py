"""Cap grids, performance surfaces and the baseline-relative improvement.

A performance surface holds the runtime of one application over a discrete
CPU x GPU power-cap grid. Entries may be missing (``known_mask`` false); the
completion module fills them in.

Surface documents are JSON objects::

    {
      "id": "cfd",
      "sensitivity_class": "cpu",          # optional, default "both"
      "baseline_cpu_w": 300,
      "baseline_gpu_w": 200,
      "cpu_levels": [300, 350, 400],
      "gpu_levels": [200, 250, 300],
      "runtime_s": [[100.0, null, 90.1], ...],   # row = cpu level
      "uncapped_cpu_w": 354,               # optional, demand-proportional input
      "uncapped_gpu_w": 221                # optional
    }

A file may hold one document or a JSON list of documents; a directory is
read as every ``*.json`` file in it, sorted by name.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    DowngradeForbiddenError,
    InvalidParamsError,
    OffGridError,
    UnknownRuntimeError,
)

SENSITIVITY_CLASSES = ("cpu", "gpu", "both", "insensitive")


@dataclass(frozen=True, order=True)
class CapPair:
    cpu_w: int
    gpu_w: int

    def __post_init__(self):
        for name in ("cpu_w", "gpu_w"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise InvalidParamsError(f"{name} must be an integer number of watts, got {value!r}")
            if value < 0:
                raise InvalidParamsError(f"{name} must be non-negative, got {value}")
            object.__setattr__(self, name, int(value))

    def dominates(self, other: "CapPair") -> bool:
        return self.cpu_w >= other.cpu_w and self.gpu_w >= other.gpu_w

    def extra_over(self, base: "CapPair") -> int:
        return (self.cpu_w - base.cpu_w) + (self.gpu_w - base.gpu_w)

    def __iter__(self):
        yield self.cpu_w
        yield self.gpu_w

    def __str__(self):
        return f"({self.cpu_w}, {self.gpu_w})"


def _levels(values: Iterable[int], name: str) -> tuple[int, ...]:
    out = []
    for v in values:
        if isinstance(v, bool) or int(v) != v:
            raise InvalidParamsError(f"{name} entries must be integers, got {v!r}")
        out.append(int(v))
    if not out:
        raise InvalidParamsError(f"{name} must be non-empty")
    if out[0] <= 0:
        raise InvalidParamsError(f"{name} must be positive")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise InvalidParamsError(f"{name} must be strictly increasing")
    return tuple(out)


@dataclass(frozen=True)
class CapGrid:
    cpu_levels: tuple[int, ...]
    gpu_levels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cpu_levels", _levels(self.cpu_levels, "cpu_levels"))
        object.__setattr__(self, "gpu_levels", _levels(self.gpu_levels, "gpu_levels"))
        object.__setattr__(self, "_cpu_pos", {c: i for i, c in enumerate(self.cpu_levels)})
        object.__setattr__(self, "_gpu_pos", {g: j for j, g in enumerate(self.gpu_levels)})

    @classmethod
    def regular(cls, cpu_range: tuple[int, int], gpu_range: tuple[int, int], step: int) -> "CapGrid":
        """Grid with ``step``-watt spacing, both ends inclusive."""
        if step <= 0:
            raise InvalidParamsError("grid step must be positive")
        return cls(
            tuple(range(cpu_range[0], cpu_range[1] + 1, step)),
            tuple(range(gpu_range[0], gpu_range[1] + 1, step)),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cpu_levels), len(self.gpu_levels)

    @property
    def size(self) -> int:
        return len(self.cpu_levels) * len(self.gpu_levels)

    def __contains__(self, cap: CapPair) -> bool:
        return cap.cpu_w in self._cpu_pos and cap.gpu_w in self._gpu_pos

    def index(self, cap: CapPair) -> tuple[int, int]:
        try:
            return self._cpu_pos[cap.cpu_w], self._gpu_pos[cap.gpu_w]
        except KeyError:
            raise OffGridError(f"cap pair {cap} is not on the grid") from None

    def flat_index(self, cap: CapPair) -> int:
        i, j = self.index(cap)
        return i * len(self.gpu_levels) + j

    def points(self) -> Iterator[CapPair]:
        """Every grid point, CPU level outermost (lexicographic order)."""
        for c in self.cpu_levels:
            for g in self.gpu_levels:
                yield CapPair(c, g)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(np.asarray(self.cpu_levels), np.asarray(self.gpu_levels), indexing="ij")

    def floor_level(self, component: str, watts: int) -> int | None:
        """Largest level of ``component`` not above ``watts``; None if all are above."""
        levels = self.cpu_levels if component == "cpu" else self.gpu_levels
        k = int(np.searchsorted(levels, watts, side="right"))
        return levels[k - 1] if k > 0 else None

    def to_dict(self) -> dict:
        return {"cpu_levels": list(self.cpu_levels), "gpu_levels": list(self.gpu_levels)}

    @classmethod
    def from_dict(cls, d: dict) -> "CapGrid":
        return cls(tuple(d["cpu_levels"]), tuple(d["gpu_levels"]))


@dataclass(frozen=True, eq=False)
class PerformanceSurface:
    """Runtime (seconds) over a cap grid; NaN marks a missing entry."""

    grid: CapGrid
    runtime_s: np.ndarray
    known_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        rt = np.array(self.runtime_s, dtype=float)
        if rt.shape != self.grid.shape:
            raise InvalidParamsError(f"runtime matrix shape {rt.shape} does not match grid {self.grid.shape}")
        mask = ~np.isnan(rt) if self.known_mask is None else np.array(self.known_mask, dtype=bool)
        if mask.shape != rt.shape:
            raise InvalidParamsError("known_mask shape does not match runtime matrix")
        rt[~mask] = np.nan
        if np.any(~np.isfinite(rt[mask])) or np.any(rt[mask] <= 0):
            raise InvalidParamsError("known runtimes must be finite and strictly positive")
        rt.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "runtime_s", rt)
        object.__setattr__(self, "known_mask", mask)

    @classmethod
    def from_function(cls, grid: CapGrid, fn) -> "PerformanceSurface":
        rt = np.array([[fn(CapPair(c, g)) for g in grid.gpu_levels] for c in grid.cpu_levels], dtype=float)
        return cls(grid, rt)

    @classmethod
    def from_points(cls, grid: CapGrid, points: dict) -> "PerformanceSurface":
        """Sparse surface from a ``{CapPair: runtime}`` mapping."""
        rt = np.full(grid.shape, np.nan)
        for cap, value in points.items():
            rt[grid.index(cap)] = value
        return cls(grid, rt)

    @property
    def fully_known(self) -> bool:
        return bool(self.known_mask.all())

    def is_known(self, cap: CapPair) -> bool:
        return cap in self.grid and bool(self.known_mask[self.grid.index(cap)])

    def runtime(self, cap: CapPair) -> float:
        idx = self.grid.index(cap)
        if not self.known_mask[idx]:
            raise UnknownRuntimeError(f"runtime at {cap} is unknown")
        return float(self.runtime_s[idx])

    def scaled(self, k: float) -> "PerformanceSurface":
        return PerformanceSurface(self.grid, self.runtime_s * k, self.known_mask)


@dataclass(frozen=True, eq=False)
class Application:
    id: str
    baseline: CapPair
    surface: PerformanceSurface
    sensitivity_class: str = "both"
    uncapped_draw: CapPair | None = None

    def __post_init__(self):
        if self.sensitivity_class not in SENSITIVITY_CLASSES:
            raise InvalidParamsError(f"unknown sensitivity class {self.sensitivity_class!r}")
        if self.baseline not in self.surface.grid:
            raise OffGridError(f"baseline {self.baseline} of {self.id!r} is not on its grid")
        if not self.surface.is_known(self.baseline):
            raise UnknownRuntimeError(f"baseline runtime of {self.id!r} is unknown")

    @property
    def grid(self) -> CapGrid:
        return self.surface.grid

    @property
    def baseline_runtime(self) -> float:
        return self.surface.runtime(self.baseline)

    def with_surface(self, surface: PerformanceSurface) -> "Application":
        return Application(self.id, self.baseline, surface, self.sensitivity_class, self.uncapped_draw)


def _check_target(app: Application, target: CapPair) -> tuple[float, float]:
    if target not in app.grid:
        raise OffGridError(f"target {target} is not on the grid of {app.id!r}")
    if not target.dominates(app.baseline):
        raise DowngradeForbiddenError(f"target {target} lowers a cap below baseline {app.baseline}")
    return app.baseline_runtime, app.surface.runtime(target)


def relative_improvement(app: Application, target: CapPair) -> float:
    """Fractional runtime reduction at ``target`` versus the baseline caps.

    Negative when the target runs slower than the baseline.
    """
    t_base, t_target = _check_target(app, target)
    return (t_base - t_target) / t_base


def normalized_performance(app: Application, target: CapPair) -> float:
    """Speedup relative to the baseline, ``T(baseline) / T(target)``."""
    t_base, t_target = _check_target(app, target)
    return t_base / t_target


# ---------------------------------------------------------------- file format

def app_to_dict(app: Application) -> dict:
    rows = [[None if not k else float(v) for v, k in zip(row, krow)]
            for row, krow in zip(app.surface.runtime_s, app.surface.known_mask)]
    doc = {
        "id": app.id,
        "sensitivity_class": app.sensitivity_class,
        "baseline_cpu_w": app.baseline.cpu_w,
        "baseline_gpu_w": app.baseline.gpu_w,
        "cpu_levels": list(app.grid.cpu_levels),
        "gpu_levels": list(app.grid.gpu_levels),
        "runtime_s": rows,
    }
    if app.uncapped_draw is not None:
        doc["uncapped_cpu_w"] = app.uncapped_draw.cpu_w
        doc["uncapped_gpu_w"] = app.uncapped_draw.gpu_w
    return doc


_REQUIRED = ("id", "baseline_cpu_w", "baseline_gpu_w", "cpu_levels", "gpu_levels", "runtime_s")


def app_from_dict(doc: dict) -> Application:
    if not isinstance(doc, dict):
        raise InvalidParamsError("surface document must be a JSON object")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise InvalidParamsError(f"surface document lacks fields: {', '.join(missing)}")
    grid = CapGrid(tuple(doc["cpu_levels"]), tuple(doc["gpu_levels"]))
    raw = doc["runtime_s"]
    if not isinstance(raw, list) or any(not isinstance(r, list) for r in raw):
        raise InvalidParamsError("runtime_s must be a row-major matrix")
    try:
        rt = np.array([[math.nan if v is None else float(v) for v in row] for row in raw], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidParamsError(f"runtime_s holds a non-numeric entry: {exc}") from None
    uncapped = None
    if "uncapped_cpu_w" in doc or "uncapped_gpu_w" in doc:
        uncapped = CapPair(doc.get("uncapped_cpu_w", 0), doc.get("uncapped_gpu_w", 0))
    return Application(
        id=str(doc["id"]),
        baseline=CapPair(doc["baseline_cpu_w"], doc["baseline_gpu_w"]),
        surface=PerformanceSurface(grid, rt),
        sensitivity_class=doc.get("sensitivity_class", "both"),
        uncapped_draw=uncapped,
    )


def dumps_apps(apps: Sequence[Application]) -> str:
    docs = [app_to_dict(a) for a in apps]
    return json.dumps(docs[0] if len(docs) == 1 else docs, indent=1, sort_keys=True) + "\n"


def save_apps(apps: Sequence[Application], path) -> None:
    Path(path).write_text(dumps_apps(apps))


def load_apps(path) -> list[Application]:
    """Read surface documents from a file or a directory of ``*.json`` files."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    apps = []
    for f in files:
        try:
            data = json.loads(f.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidParamsError(f"{f}: not valid JSON ({exc})") from None
        for doc in data if isinstance(data, list) else [data]:
            apps.append(app_from_dict(doc))
    if not apps:
        raise InvalidParamsError(f"no surface documents found in {path}")
    return apps
