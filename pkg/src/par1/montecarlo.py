"""Replicated estimation experiments.

Each replication ``i`` draws its innovation and ``X_0`` from seeds derived
from ``(master_seed, i)``, simulates a path and runs all estimators.
Replications may run in worker processes; aggregation always folds them in
index order, so the summary does not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from par1 import rng
from par1.errors import ConfigError, NotApplicable, OverflowAtStep, ZeroDenominator
from par1.estimators import estimate, estimate_online
from par1.innovation import InnovationSpec, generate
from par1.model import PARModel, Regime, phi, regime
from par1.simulate import InitialLaw, simulate_path, z_sequence
from par1.stats import boxplot_stats, histogram, quantile_abs

NEAR_DEGENERATE = 1e-6
_BLOCK = 64


def worker_count() -> int:
    """Workers to use: ``PAR1_THREADS`` when set, else the CPU count."""
    env = os.environ.get("PAR1_THREADS")
    if not env:
        return os.cpu_count() or 1
    try:
        return max(1, int(env))
    except ValueError as exc:
        raise ConfigError(f"PAR1_THREADS must be an integer, got {env!r}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    model: PARModel
    innovation: InnovationSpec
    x0: InitialLaw = InitialLaw()
    n_cycles: int = 20
    replications: int = 100
    master_seed: int = 0
    # "auto" or an explicit positive scale factor
    scale_rule: str | float = "auto"
    online: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "x0", InitialLaw.from_value(self.x0))
        if self.replications < 2:
            raise ConfigError("replications must be >= 2")
        if self.n_cycles < 2:
            raise ConfigError("n_cycles must be >= 2")
        if self.scale_rule != "auto":
            try:
                ok = float(self.scale_rule) > 0
            except (TypeError, ValueError):
                ok = False
            if not ok:
                raise ConfigError(f"scale_rule must be 'auto' or a positive number, got {self.scale_rule!r}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ExperimentConfig:
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        try:
            model = PARModel.from_dict(d["model"])
            innovation = InnovationSpec.from_dict(d.get("innovation", {}))
        except KeyError as exc:
            raise ConfigError(f"config: missing field {exc.args[0]!r}") from exc
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from exc
        x0 = d.get("x0", 1.0)
        if "x0_sd" in d:
            x0 = {"mean": x0, "sd": d["x0_sd"]}
        kw = {k: d[k] for k in ("n_cycles", "replications", "master_seed", "scale_rule", "online") if k in d}
        if "seed" in d and "master_seed" not in kw:
            kw["master_seed"] = d["seed"]
        try:
            return cls(model=model, innovation=innovation, x0=InitialLaw.from_value(x0), **kw)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "innovation": self.innovation.to_dict(),
            "x0": {"mean": self.x0.mean, "sd": self.x0.sd},
            "n_cycles": self.n_cycles,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "scale_rule": self.scale_rule,
            "online": self.online,
        }

    def with_(self, **kw: Any) -> ExperimentConfig:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return ExperimentConfig(**d)


def estimator_ids(period: int) -> list[str]:
    return [f"a_{r}" for r in range(1, period + 1)] + ["phi_hat", "phi_tilde"]


@dataclass
class EstimatorStats:
    mean: float
    median: float
    error_mean: float
    error_sigma: float
    boxplot: tuple[float, float, float, float, float]
    abs_095: float
    scaled_errors: np.ndarray = field(repr=False)

    def to_dict(self) -> dict[str, Any]:
        lw, lh, med, uh, uw = self.boxplot
        return {
            "mean": self.mean,
            "median": self.median,
            "error": {
                "mean": self.error_mean,
                "sigma": self.error_sigma,
                "u_whisker": uw,
                "u_hinge": uh,
                "median": med,
                "l_hinge": lh,
                "l_whisker": lw,
                "abs_0.95": self.abs_095,
            },
            "scaled_errors": self.scaled_errors.tolist(),
        }


@dataclass
class MCSummary:
    config: ExperimentConfig
    estimators: dict[str, EstimatorStats]
    scale_factor_used: float
    n_ok: int
    failures: dict[str, int]
    degenerate_count: int
    estimates: np.ndarray = field(repr=False)  # (n_ok, P + 2), columns as estimator_ids

    def to_dict(self) -> dict[str, Any]:
        cfg = self.config
        return {
            "config": cfg.to_dict(),
            "phi": phi(cfg.model),
            "regime": regime(cfg.model).value,
            "parameters": dict(zip(estimator_ids(cfg.model.period), _true_values(cfg.model).tolist())),
            "n_ok": self.n_ok,
            "failures": dict(self.failures),
            "degenerate_count": self.degenerate_count,
            "scale_factor_used": self.scale_factor_used,
            "estimators": {k: v.to_dict() for k, v in self.estimators.items()},
        }

    def histogram(self, estimator_id: str, n_bins: int = 30) -> tuple[np.ndarray, np.ndarray]:
        return scaled_error_histogram(self, estimator_id, n_bins)


def _true_values(model: PARModel) -> np.ndarray:
    ph = phi(model)
    return np.concatenate([model.a, [ph, ph]])


def scale_factor(model: PARModel, n_cycles: int, rule: str | float = "auto") -> float:
    """Factor ``s`` such that ``error / s`` is the scaled error.

    Under ``"auto"``: ``phi^(-n)`` when explosive, ``1/n`` when unstable and
    ``n^(-1/2)`` when stable.
    """
    if rule != "auto":
        return float(rule)
    reg = regime(model)
    if reg is Regime.EXPLOSIVE:
        return phi(model) ** (-n_cycles)
    if reg is Regime.UNSTABLE:
        return 1.0 / n_cycles
    return n_cycles**-0.5


# -- replications ------------------------------------------------------------

def replicate(cfg: ExperimentConfig, i: int) -> tuple[str, np.ndarray | None, float]:
    """Run replication ``i``: ``(status, estimates, x0 + zeta_hat)``."""
    model = cfg.model
    P = model.period
    N = cfg.n_cycles * P
    stream = generate(cfg.innovation, N, rng.derive_seed(cfg.master_seed, i))
    x0 = float(cfg.x0.draw(rng.generator(cfg.master_seed, rng.INITIAL, i), 1)[0])
    try:
        if cfg.online:
            rep = estimate_online(model, stream, x0, cfg.n_cycles)
        else:
            rep = estimate(simulate_path(model, stream, x0, cfg.n_cycles))
    except OverflowAtStep:
        return "overflow", None, math.nan
    except ZeroDenominator:
        return "zero_denominator", None, math.nan
    est = np.concatenate([rep.a_hat, [rep.phi_hat, rep.phi_tilde]])
    if not np.all(np.isfinite(est)):
        return "degenerate", None, math.nan
    amp = math.nan
    if abs(phi(model)) > 1:
        amp = x0 + z_sequence(model, stream, cfg.n_cycles).zeta_hat
    return "ok", est, amp


def _run_block(cfg: ExperimentConfig, start: int, stop: int) -> list[tuple[str, np.ndarray | None, float]]:
    return [replicate(cfg, i) for i in range(start, stop)]


def _run_all(cfg: ExperimentConfig, workers: int | None) -> list[tuple[str, np.ndarray | None, float]]:
    workers = worker_count() if workers is None else max(1, workers)
    blocks = [(s, min(s + _BLOCK, cfg.replications)) for s in range(0, cfg.replications, _BLOCK)]
    if workers == 1 or len(blocks) == 1:
        results = [_run_block(cfg, s, e) for s, e in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, cfg, s, e) for s, e in blocks]
            results = [f.result() for f in futures]
    return [r for block in results for r in block]


def _scaled(err: np.ndarray, cfg: ExperimentConfig, factor: float) -> np.ndarray:
    if factor > 0 and math.isfinite(1.0 / factor):
        return err / factor
    # phi^n is beyond the double range; multiply in the log domain, saturating at inf
    ph, n = phi(cfg.model), cfg.n_cycles
    sign = np.sign(err) * (np.sign(ph) ** n)
    with np.errstate(divide="ignore", over="ignore"):
        return sign * np.exp(np.log(np.abs(err)) + n * math.log(abs(ph)))


def _stats(estimates: np.ndarray, truth: float, cfg: ExperimentConfig, factor: float) -> EstimatorStats:
    err = estimates - truth
    return EstimatorStats(
        mean=float(np.mean(estimates)),
        median=float(np.median(estimates)),
        error_mean=float(np.mean(err)),
        error_sigma=float(np.std(err, ddof=1)) if err.size > 1 else 0.0,
        boxplot=tuple(boxplot_stats(err)),
        abs_095=quantile_abs(err, 0.95),
        scaled_errors=_scaled(err, cfg, factor),
    )


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> MCSummary:
    """Run all replications and aggregate the table statistics.

    Failed replications (overflow, zero or degenerate denominators) are
    counted per category and left out of the statistics; if every
    replication fails the last failure category is raised as
    :class:`ConfigError`.
    """
    results = _run_all(cfg, workers)
    failures: dict[str, int] = {}
    rows, amps = [], []
    for status, est, amp in results:
        if status != "ok":
            failures[status] = failures.get(status, 0) + 1
            continue
        rows.append(est)
        amps.append(amp)
    if not rows:
        raise ConfigError(f"all {cfg.replications} replications failed: {failures}")
    estimates = np.vstack(rows)
    truth = _true_values(cfg.model)
    factor = scale_factor(cfg.model, cfg.n_cycles, cfg.scale_rule)
    ids = estimator_ids(cfg.model.period)
    stats = {name: _stats(estimates[:, j], truth[j], cfg, factor) for j, name in enumerate(ids)}
    amps_arr = np.asarray(amps)
    degenerate = int(np.sum(np.abs(amps_arr[np.isfinite(amps_arr)]) < NEAR_DEGENERATE))
    return MCSummary(
        config=cfg,
        estimators=stats,
        scale_factor_used=factor,
        n_ok=len(rows),
        failures=failures,
        degenerate_count=degenerate,
        estimates=estimates,
    )


def scaled_error_histogram(summary: MCSummary, estimator_id: str, n_bins: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Bin edges and counts of one estimator's scaled errors."""
    try:
        values = summary.estimators[estimator_id].scaled_errors
    except KeyError as exc:
        raise KeyError(f"unknown estimator {estimator_id!r}") from exc
    return histogram(values, n_bins)


# -- convergence rate ----------------------------------------------------------

@dataclass
class RateResult:
    slope: float
    expected: float
    axis: str  # "n" or "log n"
    n_grid: list[int]
    medians: np.ndarray

    @property
    def ratio(self) -> float:
        return self.slope / self.expected


def rate_regression(
    config_base: ExperimentConfig,
    n_grid: Sequence[int],
    estimator: str = "a_1",
    workers: int | None = None,
) -> RateResult:
    """Slope of ``log median |error|`` across ``n_grid``.

    For an explosive model the regressor is ``n`` (number of P-cycles) and
    the expected slope is ``-log|phi|``. Otherwise the regressor is
    ``log n`` with expected slope ``-1`` (unstable) or ``-1/2`` (stable).

    Raises
    ------
    NotApplicable
        If some median error is zero, e.g. for a noiseless model.
    """
    grid = sorted(set(int(n) for n in n_grid))
    if len(grid) < 3:
        raise NotApplicable("rate regression needs at least 3 distinct n values")
    ids = estimator_ids(config_base.model.period)
    j = ids.index(estimator)
    truth = _true_values(config_base.model)[j]
    medians = []
    for n in grid:
        s = run_experiment(config_base.with_(n_cycles=n), workers)
        medians.append(float(np.median(np.abs(s.estimates[:, j] - truth))))
    med = np.asarray(medians)
    if np.any(med <= 0):
        raise NotApplicable("median error is zero on part of the grid; no rate to fit")
    reg = regime(config_base.model)
    if reg is Regime.EXPLOSIVE:
        x, expected, axis = np.asarray(grid, float), -math.log(abs(phi(config_base.model))), "n"
    else:
        x, axis = np.log(np.asarray(grid, float)), "log n"
        expected = -1.0 if reg is Regime.UNSTABLE else -0.5
    slope = float(np.polyfit(x, np.log(med), 1)[0])
    return RateResult(slope, expected, axis, grid, med)
