"""Low-rank completion of performance surfaces.

Rows of the completion matrix are applications, columns are the flattened
cap-grid configurations (CPU level outermost) and entries are log-runtimes.
The model is a biased factorization::

    log T[a, j] ~ mu + app_bias[a] + config_bias[j] + app_factors[a] . config_factors[j]

fit by gradient descent preconditioned with the Gauss-Newton diagonal and
Armijo backtracking, so the training loss never increases between epochs.

An unseen application is placed in the embedding space from a handful of
probes: its bias and factors get a Gaussian prior estimated from the
training rows, and the posterior mode given the probes is used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GridMismatchError, InsufficientDataError, InvalidParamsError, OffGridError
from .surface import CapGrid, CapPair, PerformanceSurface

CHECKPOINT_FORMAT = "ecoshift.completion"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class SamplingPlan:
    points: tuple[CapPair, ...]

    def __post_init__(self):
        if len(set(self.points)) != len(self.points):
            raise InvalidParamsError("sampling plan repeats a cap pair")
        if len(self.points) < 3:
            raise InvalidParamsError("a sampling plan needs at least 3 probes")


def default_plan(grid: CapGrid, baseline: CapPair) -> SamplingPlan:
    """Baseline, the four grid corners and the grid centre."""
    cpu, gpu = grid.cpu_levels, grid.gpu_levels
    if baseline not in grid:
        raise OffGridError(f"baseline {baseline} is not on the grid")
    candidates = [
        baseline,
        CapPair(cpu[0], gpu[0]),
        CapPair(cpu[0], gpu[-1]),
        CapPair(cpu[-1], gpu[0]),
        CapPair(cpu[-1], gpu[-1]),
        CapPair(cpu[len(cpu) // 2], gpu[len(gpu) // 2]),
    ]
    return SamplingPlan(tuple(dict.fromkeys(candidates)))


@dataclass(frozen=True, eq=False)
class CompletionModel:
    grid: CapGrid
    global_bias: float
    app_bias: np.ndarray
    config_bias: np.ndarray
    app_factors: np.ndarray
    config_factors: np.ndarray
    l2: float
    noise_var: float
    loss_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.latent_dim < 1:
            raise InvalidParamsError("latent dimension must be at least 1")
        arrays = (self.app_bias, self.config_bias, self.app_factors, self.config_factors)
        if not np.isfinite(self.global_bias) or not all(np.all(np.isfinite(a)) for a in arrays):
            raise InvalidParamsError("completion model holds non-finite values")
        if self.config_factors.shape[0] != self.grid.size:
            raise GridMismatchError("config embeddings do not match the grid size")

    @property
    def latent_dim(self) -> int:
        return int(self.app_factors.shape[1])

    def reconstruct(self) -> np.ndarray:
        """Predicted log-runtime matrix for the training applications."""
        return (self.global_bias + self.app_bias[:, None] + self.config_bias[None, :]
                + self.app_factors @ self.config_factors.T)


def _stack(surfaces: Sequence[PerformanceSurface]):
    if len(surfaces) < 2:
        raise InsufficientDataError("fitting needs at least two training surfaces")
    grid = surfaces[0].grid
    for s in surfaces[1:]:
        if s.grid != grid:
            raise GridMismatchError("training surfaces must share one cap grid")
    mask = np.stack([s.known_mask.ravel() for s in surfaces])
    if not mask.any(axis=1).all():
        raise InsufficientDataError("every training surface needs at least one known runtime")
    y = np.zeros(mask.shape)
    rt = np.stack([s.runtime_s.ravel() for s in surfaces])
    y[mask] = np.log(rt[mask])
    return grid, y, mask


def _loss(params, y, mask, l2):
    mu, b, c, P, Q = params
    r = np.where(mask, mu + b[:, None] + c[None, :] + P @ Q.T - y, 0.0)
    return 0.5 * float(np.sum(r * r)) + 0.5 * l2 * float(np.sum(P * P) + np.sum(Q * Q)), r


def fit(training_surfaces: Sequence[PerformanceSurface], latent_dim: int = 8, l2: float = 1e-3,
        tol: float = 1e-6, max_epochs: int = 2000, seed: int = 0) -> CompletionModel:
    """Fit the biased factorization to the known log-runtimes of ``training_surfaces``."""
    if latent_dim < 1:
        raise InvalidParamsError("latent dimension must be at least 1")
    grid, y, mask = _stack(training_surfaces)
    n_apps, n_cfg = y.shape
    row_n = np.maximum(mask.sum(axis=1), 1)
    col_n = np.maximum(mask.sum(axis=0), 1)
    n = mask.sum()

    # biases start at the row/column means of the residual
    mu = float(y[mask].mean())
    c = np.where(mask, y - mu, 0.0).sum(axis=0) / col_n
    b = np.where(mask, y - mu - c[None, :], 0.0).sum(axis=1) / row_n
    rng = np.random.default_rng(seed)
    P = rng.normal(scale=0.01, size=(n_apps, latent_dim))
    Q = rng.normal(scale=0.01, size=(n_cfg, latent_dim))
    params = [mu, b, c, P, Q]

    loss, r = _loss(params, y, mask, l2)
    history = [loss]
    step = 1.0
    for _ in range(max_epochs):
        mu, b, c, P, Q = params
        grads = [r.sum(), r.sum(axis=1), r.sum(axis=0), r @ Q + l2 * P, r.T @ P + l2 * Q]
        # inverse Gauss-Newton diagonal of each block
        scales = [1.0 / n, 1.0 / row_n, 1.0 / col_n,
                  1.0 / (mask @ (Q * Q) + l2), 1.0 / (mask.T @ (P * P) + l2)]
        direction = [-s * g for s, g in zip(scales, grads)]
        slope = sum(float(np.sum(g * d)) for g, d in zip(grads, direction))
        if slope == 0.0:
            break
        while True:
            trial = [p + step * d for p, d in zip(params, direction)]
            trial_loss, trial_r = _loss(trial, y, mask, l2)
            if trial_loss <= loss + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-12:
                trial, trial_loss, trial_r = params, loss, r
                break
        converged = loss - trial_loss <= tol * max(loss, 1e-300)
        params, loss, r = trial, trial_loss, trial_r
        history.append(loss)
        step = min(step * 2.0, 1.0)
        if converged:
            break

    mu, b, c, P, Q = params
    resid_var = float(np.sum(r * r) / max(n, 1))
    return CompletionModel(
        grid=grid,
        global_bias=float(mu),
        app_bias=b,
        config_bias=c,
        app_factors=P,
        config_factors=Q,
        l2=l2,
        noise_var=max(resid_var, 1e-4),
        loss_history=tuple(history),
    )


def _embed(model: CompletionModel, cols: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Posterior mode of [bias, factors] for a new row given log-runtime probes."""
    Z = np.column_stack([model.app_bias, model.app_factors])
    prior_mean = Z.mean(axis=0)
    prior_cov = np.cov(Z, rowvar=False) if Z.shape[0] > 1 else np.zeros((Z.shape[1],) * 2)
    prior_cov = np.atleast_2d(prior_cov) + (model.l2 + 1e-6) * np.eye(Z.shape[1])
    X = np.column_stack([np.ones(cols.size), model.config_factors[cols]])
    resid = targets - model.global_bias - model.config_bias[cols]
    prec = np.linalg.inv(prior_cov)
    lhs = X.T @ X / model.noise_var + prec
    rhs = X.T @ resid / model.noise_var + prec @ prior_mean
    return np.linalg.solve(lhs, rhs)


def predict_surface(model: CompletionModel, app_samples: Sequence[tuple[CapPair, float]],
                    grid: CapGrid | None = None) -> PerformanceSurface:
    """Full surface for a new application from ``(caps, runtime)`` probes.

    Probed entries are returned unchanged; every other entry is predicted.
    """
    grid = model.grid if grid is None else grid
    if grid != model.grid:
        raise GridMismatchError("prediction grid differs from the model grid")
    if not app_samples:
        raise InsufficientDataError("prediction needs at least one probe")
    observed = {}
    for cap, runtime in app_samples:
        if runtime <= 0 or not np.isfinite(runtime):
            raise InvalidParamsError(f"probe runtime at {cap} must be positive")
        observed[grid.flat_index(cap)] = float(runtime)
    cols = np.fromiter(observed, dtype=np.int64)
    targets = np.log(np.fromiter(observed.values(), dtype=float))

    z = _embed(model, cols, targets)
    log_pred = model.global_bias + model.config_bias + z[0] + model.config_factors @ z[1:]
    runtime = np.exp(log_pred)
    runtime[cols] = np.fromiter(observed.values(), dtype=float)
    return PerformanceSurface(grid, runtime.reshape(grid.shape))


def sample_surface(surface: PerformanceSurface, plan: SamplingPlan,
                   noise_sd: float = 0.0, rng: np.random.Generator | None = None) -> list[tuple[CapPair, float]]:
    """Probe ``surface`` at the plan points, with optional multiplicative noise."""
    out = []
    for cap in plan.points:
        value = surface.runtime(cap)
        if noise_sd > 0:
            value *= float(np.exp(rng.normal(0.0, noise_sd)))
        out.append((cap, value))
    return out


def prediction_accuracy(true_surface: PerformanceSurface, predicted_surface: PerformanceSurface,
                        baseline: CapPair) -> float:
    """Mean of ``1 - |p_hat - p| / p`` over grid points known in both surfaces.

    ``p`` is baseline-relative speedup ``T(baseline) / T(point)``; the
    baseline point itself is included.
    """
    if true_surface.grid != predicted_surface.grid:
        raise GridMismatchError("accuracy needs surfaces on the same grid")
    t_base = true_surface.runtime(baseline)
    p_base = predicted_surface.runtime(baseline)
    both = true_surface.known_mask & predicted_surface.known_mask
    p = t_base / true_surface.runtime_s[both]
    p_hat = p_base / predicted_surface.runtime_s[both]
    return float(np.mean(1.0 - np.abs(p_hat - p) / p))


# ---------------------------------------------------------------- checkpoints

def model_to_dict(model: CompletionModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "grid": model.grid.to_dict(),
        "latent_dim": model.latent_dim,
        "l2": model.l2,
        "noise_var": model.noise_var,
        "global_bias": model.global_bias,
        "app_bias": model.app_bias.tolist(),
        "config_bias": model.config_bias.tolist(),
        "app_factors": model.app_factors.tolist(),
        "config_factors": model.config_factors.tolist(),
    }


def model_from_dict(doc: dict) -> CompletionModel:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise InvalidParamsError("not a completion-model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise InvalidParamsError(f"unsupported checkpoint version {doc.get('version')!r}")
    d = int(doc["latent_dim"])
    return CompletionModel(
        grid=CapGrid.from_dict(doc["grid"]),
        global_bias=float(doc["global_bias"]),
        app_bias=np.asarray(doc["app_bias"], dtype=float),
        config_bias=np.asarray(doc["config_bias"], dtype=float),
        app_factors=np.asarray(doc["app_factors"], dtype=float).reshape(-1, d),
        config_factors=np.asarray(doc["config_factors"], dtype=float).reshape(-1, d),
        l2=float(doc["l2"]),
        noise_var=float(doc["noise_var"]),
    )


def save_model(model: CompletionModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n")


def load_model(path) -> CompletionModel:
    try:
        return model_from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError) as exc:
        raise InvalidParamsError(f"{path}: malformed checkpoint ({exc})") from None
