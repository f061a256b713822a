"""Synthetic performance surfaces for the four sensitivity classes.

Runtime is separable in the two caps::

    T(c, g) = base_runtime / (speedup_cpu(c) * speedup_gpu(g)) * exp(noise)

Each speedup rises from 1 at the lowest grid level to ``1 + max_speedup`` at
its saturation cap along a concave exponential ramp, then stays flat.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import InvalidParamsError
from .surface import SENSITIVITY_CLASSES, Application, CapGrid, CapPair, PerformanceSurface

# Measured anchors on an H100 node starting from 300 W CPU / 200 W GPU:
# (from_w, to_w, runtime reduction of the step)
CPU_ANCHORS = ((300, 400, 0.17), (400, 500, 0.076))
GPU_ANCHORS = ((200, 300, 0.155), (300, 400, 0.021))


@dataclass(frozen=True)
class SyntheticSurfaceParams:
    sensitivity_class: str
    cpu_saturation_w: int
    gpu_saturation_w: int
    cpu_max_speedup: float
    gpu_max_speedup: float
    curvature: float
    noise_sd: float = 0.0
    base_runtime_s: float = 100.0

    def validate(self, grid: CapGrid) -> None:
        if self.sensitivity_class not in SENSITIVITY_CLASSES:
            raise InvalidParamsError(f"unknown sensitivity class {self.sensitivity_class!r}")
        if self.cpu_max_speedup < 0 or self.gpu_max_speedup < 0:
            raise InvalidParamsError("max speedups must be non-negative")
        if not self.curvature > 0:
            raise InvalidParamsError("curvature must be positive")
        if self.noise_sd < 0 or not self.base_runtime_s > 0:
            raise InvalidParamsError("noise_sd must be >= 0 and base_runtime_s > 0")
        for name, sat, levels in (("cpu", self.cpu_saturation_w, grid.cpu_levels),
                                  ("gpu", self.gpu_saturation_w, grid.gpu_levels)):
            if not levels[0] <= sat <= levels[-1]:
                raise InvalidParamsError(f"{name} saturation {sat} W lies outside the grid range")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSurfaceParams":
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidParamsError(f"bad synthetic parameters: {exc}") from None


def speedup(watts, lowest: float, saturation: float, max_speedup: float, curvature: float):
    """Concave saturating ramp: 1 at ``lowest``, ``1 + max_speedup`` from ``saturation`` on."""
    watts = np.asarray(watts, dtype=float)
    if saturation <= lowest:
        return np.full(watts.shape, 1.0 + max_speedup)
    z = np.clip((watts - lowest) / (saturation - lowest), 0.0, 1.0)
    return 1.0 + max_speedup * (-np.expm1(-curvature * z)) / (-np.expm1(-curvature))


def generate_surface(params: SyntheticSurfaceParams, baseline: CapPair, grid: CapGrid,
                     seed: int | np.random.SeedSequence = 0) -> PerformanceSurface:
    params.validate(grid)
    if baseline not in grid:
        raise InvalidParamsError(f"baseline {baseline} is not on the grid")
    cc, gg = grid.mesh()
    s_cpu = speedup(cc, grid.cpu_levels[0], params.cpu_saturation_w, params.cpu_max_speedup, params.curvature)
    s_gpu = speedup(gg, grid.gpu_levels[0], params.gpu_saturation_w, params.gpu_max_speedup, params.curvature)
    runtime = params.base_runtime_s / (s_cpu * s_gpu)
    if params.noise_sd > 0:
        rng = np.random.default_rng(seed)
        runtime = runtime * np.exp(rng.normal(0.0, params.noise_sd, size=runtime.shape))
    return PerformanceSurface(grid, runtime)


def calibrate_speedup(anchors, lowest: int, saturation: int) -> tuple[float, float]:
    """``(max_speedup, curvature)`` reproducing two step-wise runtime reductions.

    ``anchors`` holds two ``(from_w, to_w, reduction)`` triples, where
    ``reduction = 1 - T(to_w) / T(from_w)`` along one cap axis.
    """
    if len(anchors) != 2:
        raise InvalidParamsError("calibration needs exactly two anchors")
    targets = np.array([np.log(1.0 / (1.0 - r)) for _, _, r in anchors])

    def residual(x):
        m, k = np.exp(x)
        got = [np.log(speedup(b, lowest, saturation, m, k) / speedup(a, lowest, saturation, m, k))
               for a, b, _ in anchors]
        return np.asarray(got, dtype=float).ravel() - targets

    sol = least_squares(residual, x0=np.log([0.3, 2.0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.max(np.abs(sol.fun)) > 1e-9:
        raise InvalidParamsError("anchors cannot be matched by a concave saturating ramp")
    m, k = np.exp(sol.x)
    return float(m), float(k)


def anchored_params(sensitivity_class: str, grid: CapGrid, noise_sd: float = 0.0) -> SyntheticSurfaceParams:
    """Single-axis params calibrated to the measured CPU or GPU anchors."""
    if sensitivity_class == "cpu":
        sat = min(grid.cpu_levels[-1], max(b for _, b, _ in CPU_ANCHORS))
        m, k = calibrate_speedup(CPU_ANCHORS, grid.cpu_levels[0], sat)
        return SyntheticSurfaceParams("cpu", sat, grid.gpu_levels[-1], m, 0.0, k, noise_sd)
    if sensitivity_class == "gpu":
        sat = min(grid.gpu_levels[-1], max(b for _, b, _ in GPU_ANCHORS))
        m, k = calibrate_speedup(GPU_ANCHORS, grid.gpu_levels[0], sat)
        return SyntheticSurfaceParams("gpu", grid.cpu_levels[-1], sat, 0.0, m, k, noise_sd)
    raise InvalidParamsError("anchors exist only for the cpu and gpu classes")


def random_params(sensitivity_class: str, grid: CapGrid, rng: np.random.Generator,
                  noise_sd: float = 0.0) -> SyntheticSurfaceParams:
    """Draw plausible parameters for one application of the given class."""
    strong = {"cpu": (True, False), "gpu": (False, True), "both": (True, True),
              "insensitive": (False, False)}[sensitivity_class]
    speedups, sats = [], []
    for is_strong, levels in zip(strong, (grid.cpu_levels, grid.gpu_levels)):
        lo, hi = levels[0], levels[-1]
        if is_strong:
            hi_speedup = 0.35 if sensitivity_class == "both" else 0.45
            speedups.append(float(rng.uniform(0.12, hi_speedup)))
        else:
            speedups.append(float(rng.uniform(0.0, 0.03)))
        sats.append(int(round(rng.uniform(lo + 0.4 * (hi - lo), hi))))
    return SyntheticSurfaceParams(
        sensitivity_class,
        cpu_saturation_w=sats[0],
        gpu_saturation_w=sats[1],
        cpu_max_speedup=speedups[0],
        gpu_max_speedup=speedups[1],
        curvature=float(rng.uniform(1.0, 4.0)),
        noise_sd=noise_sd,
        base_runtime_s=float(rng.uniform(50.0, 200.0)),
    )


def uncapped_draw(params: SyntheticSurfaceParams, grid: CapGrid) -> CapPair:
    """Power an application would draw with no cap: up to saturation on axes that matter."""
    out = []
    for m, sat, levels in ((params.cpu_max_speedup, params.cpu_saturation_w, grid.cpu_levels),
                           (params.gpu_max_speedup, params.gpu_saturation_w, grid.gpu_levels)):
        lo, hi = levels[0], levels[-1]
        out.append(sat if m >= 0.05 else int(lo + 0.25 * (hi - lo)))
    return CapPair(*out)


def synthetic_app(app_id: str, params: SyntheticSurfaceParams, baseline: CapPair, grid: CapGrid,
                  seed: int | np.random.SeedSequence = 0) -> Application:
    return Application(app_id, baseline, generate_surface(params, baseline, grid, seed),
                       params.sensitivity_class, uncapped_draw(params, grid))
