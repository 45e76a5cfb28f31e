"""Least squares estimators of the PAR(1) coefficients and of their product.

All ratio computations use power-of-two rescaling: the regressors are
multiplied by ``2**-e`` (an exact operation) before the quadratic forms are
accumulated, so the ratios agree with plain summation whenever plain
summation does not overflow and stay correct when it would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from par1.errors import ConfigError, ZeroDenominator
from par1.innovation import InnovationStream, block_V_matrix
from par1.model import PARModel
from par1.simulate import Path

# B below this (after undoing the scale) is reported as degenerate
DEGENERATE_B = 1e-300
_LOG2_DEGENERATE = math.log2(DEGENERATE_B)


@dataclass
class EstimateReport:
    a_hat: np.ndarray
    phi_tilde: float
    phi_hat: float
    b_r: np.ndarray
    b_total: float
    n_cycles: int
    degenerate_flags: np.ndarray
    c_r: np.ndarray | None = None
    c_total: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "n_cycles": self.n_cycles,
            "a_hat": self.a_hat.tolist(),
            "phi_tilde": self.phi_tilde,
            "phi_hat": self.phi_hat,
            "b_r": self.b_r.tolist(),
            "b_total": self.b_total,
            "degenerate_flags": [bool(f) for f in self.degenerate_flags],
        }
        if self.c_r is not None:
            out["c_r"] = self.c_r.tolist()
            out["c_total"] = self.c_total
        return out


@dataclass
class _ScaledSums:
    """``num = cross * 2**exp`` and ``den = square * 2**exp``."""

    cross: float
    square: float
    exp: int

    @property
    def ratio(self) -> float:
        return self.cross / self.square

    @property
    def den(self) -> float:
        return math.ldexp(self.square, self.exp) if self.square else 0.0

    @property
    def degenerate(self) -> bool:
        return self.square > 0 and math.log2(self.square) + self.exp < _LOG2_DEGENERATE


def _scaled_sums(reg: np.ndarray, resp: np.ndarray) -> _ScaledSums:
    big = max(float(np.max(np.abs(reg), initial=0.0)), float(np.max(np.abs(resp), initial=0.0)))
    if big == 0.0:
        return _ScaledSums(0.0, 0.0, 0)
    e = math.frexp(big)[1]
    p = np.ldexp(reg, -e)
    q = np.ldexp(resp, -e)
    return _ScaledSums(float(np.sum(p * q)), float(np.sum(p * p)), 2 * e)


def _check_path(path: Path) -> None:
    if path.n_cycles < 2:
        raise ConfigError(f"estimation needs n_cycles >= 2, got {path.n_cycles}")


def _phase_sums(path: Path) -> list[_ScaledSums]:
    P, n = path.model.period, path.n_cycles
    x = path.x
    out = []
    for r in range(1, P + 1):
        reg = x[r - 1 : n * P : P]  # X_{jP+r-1}, j = 0..n-1
        resp = x[r : n * P + 1 : P]  # X_{jP+r}
        out.append(_scaled_sums(reg, resp))
    return out


def _lag_sums(path: Path) -> _ScaledSums:
    P, n = path.model.period, path.n_cycles
    x = path.x
    return _scaled_sums(x[1 : (n - 1) * P + 1], x[P + 1 : n * P + 1])


def _ratios(sums: list[_ScaledSums]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a_hat = np.empty(len(sums))
    b_r = np.empty(len(sums))
    flags = np.zeros(len(sums), dtype=bool)
    for i, s in enumerate(sums):
        if s.square == 0.0:
            raise ZeroDenominator(i + 1)
        flags[i] = s.degenerate
        a_hat[i] = math.nan if flags[i] else s.ratio
        b_r[i] = s.den
    return a_hat, b_r, flags


def lse_periodic(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Per-phase least squares slopes ``a_hat`` and denominators ``B_n^(r)``.

    ``a_hat[r-1] = sum_j X_{jP+r-1} X_{jP+r} / sum_j X_{jP+r-1}^2`` over
    ``j = 0..n-1``. Degenerate phases (``0 < B < 1e-300``) come back as NaN;
    use :func:`estimate` to see the flags.
    """
    _check_path(path)
    a_hat, b_r, _ = _ratios(_phase_sums(path))
    return a_hat, b_r


def product_estimator(a_hat: np.ndarray) -> float:
    out = 1.0
    for v in np.asarray(a_hat, dtype=float):
        out *= float(v)
    return out


def lag_lse_phi(path: Path) -> float:
    """Lag-P least squares slope ``sum X_k X_{k-P} / sum X_{k-P}^2``, ``k = P+1..nP``."""
    _check_path(path)
    s = _lag_sums(path)
    if s.square == 0.0:
        raise ZeroDenominator(None)
    return math.nan if s.degenerate else s.ratio


def diagnostic_sums(path: Path) -> tuple[np.ndarray, np.ndarray, float, float]:
    """``(B_n^(r), C_n^(r), B_n, C_n)`` computed by plain summation.

    Needs the innovation that produced the path.
    """
    if path.stream is None:
        raise ConfigError("diagnostic sums need the path's innovation stream")
    _check_path(path)
    P, n = path.model.period, path.n_cycles
    x, u = path.x, path.stream.values
    b_r = np.array([np.sum(x[r - 1 : n * P : P] ** 2) for r in range(1, P + 1)])
    c_r = np.array([np.sum(x[r - 1 : n * P : P] * u[r - 1 : n * P : P]) for r in range(1, P + 1)])
    b_total = float(np.sum(x[1 : (n - 1) * P + 1] ** 2))
    V = block_V_matrix(path.model, path.stream, n)  # rows j = 1..n-1
    prev = x[1 : (n - 1) * P + 1].reshape(n - 1, P)  # X_{(j-1)P+r}
    c_total = float(np.sum(prev * V))
    return b_r, c_r, b_total, c_total


def estimate(path: Path, *, diagnostics: bool = False) -> EstimateReport:
    """All estimators for one path, optionally with the innovation-based sums."""
    _check_path(path)
    a_hat, b_r, flags = _ratios(_phase_sums(path))
    lag = _lag_sums(path)
    if lag.square == 0.0:
        raise ZeroDenominator(None)
    report = EstimateReport(
        a_hat=a_hat,
        phi_tilde=product_estimator(a_hat),
        phi_hat=math.nan if lag.degenerate else lag.ratio,
        b_r=b_r,
        b_total=lag.den,
        n_cycles=path.n_cycles,
        degenerate_flags=flags,
    )
    if diagnostics and path.stream is not None:
        _, c_r, _, c_total = diagnostic_sums(path)
        report.c_r, report.c_total = c_r, c_total
    return report


# -- streaming variant ------------------------------------------------------

@dataclass
class _Acc:
    """Sum held as ``value * 2**exp`` with the exponent of the largest term."""

    value: float = 0.0
    exp: int = 0

    def add(self, t: float, f: int) -> None:
        if t == 0.0:
            return
        if self.value == 0.0:
            self.value, self.exp = t, f
        elif f > self.exp:
            self.value = math.ldexp(self.value, self.exp - f) + t
            self.exp = f
        else:
            self.value += math.ldexp(t, f - self.exp)

    def ratio(self, other: _Acc) -> float:
        return math.ldexp(self.value / other.value, self.exp - other.exp)

    def as_float(self) -> float:
        try:
            return math.ldexp(self.value, self.exp)
        except OverflowError:
            return math.inf


@dataclass
class _Scaled:
    y: float
    e: int = 0

    def normalize(self) -> None:
        if self.y != 0.0 and not (2.0**-64 < abs(self.y) < 2.0**64):
            m, k = math.frexp(self.y)
            self.y, self.e = m, self.e + k


def estimate_online(
    model: PARModel, stream: InnovationStream, x0: float, n_cycles: int
) -> EstimateReport:
    """Simulate and estimate in one pass without storing ``X``.

    The state is kept as ``y * 2**e`` and every sum carries its own binary
    exponent, so ``n_cycles`` can go well past the point where ``|X_k|``
    exceeds the double range (where :func:`par1.simulate.simulate_path`
    raises). Reported ``b_r`` / ``b_total`` saturate to ``inf`` when they
    do not fit in a double; the ratios stay finite.
    """
    P = model.period
    if n_cycles < 2:
        raise ConfigError(f"estimation needs n_cycles >= 2, got {n_cycles}")
    if stream.length < n_cycles * P:
        raise ConfigError(f"stream has {stream.length} values, need {n_cycles * P}")
    a = model.coeffs
    u = stream.values.tolist()
    num = [_Acc() for _ in range(P)]
    den = [_Acc() for _ in range(P)]
    lag_num, lag_den = _Acc(), _Acc()
    state = _Scaled(float(x0))
    state.normalize()
    hist: list[tuple[float, int]] = [(state.y, state.e)]  # X_0..X_k, trimmed to P+1
    for k in range(1, n_cycles * P + 1):
        r = (k - 1) % P
        py, pe = state.y, state.e
        state.y = a[r] * py + math.ldexp(u[k - 1], -pe)
        state.normalize()
        y, e = state.y, state.e
        num[r].add(py * y, pe + e)
        den[r].add(py * py, 2 * pe)
        if k > P:
            ly, le = hist[-P]  # X_{k-P}
            lag_num.add(ly * y, le + e)
            lag_den.add(ly * ly, 2 * le)
        hist.append((y, e))
        if len(hist) > P + 1:
            del hist[0]
    a_hat = np.empty(P)
    b_r = np.empty(P)
    flags = np.zeros(P, dtype=bool)
    for r in range(P):
        if den[r].value == 0.0:
            raise ZeroDenominator(r + 1)
        flags[r] = math.log2(abs(den[r].value)) + den[r].exp < _LOG2_DEGENERATE
        a_hat[r] = math.nan if flags[r] else num[r].ratio(den[r])
        b_r[r] = den[r].as_float()
    if lag_den.value == 0.0:
        raise ZeroDenominator(None)
    return EstimateReport(
        a_hat=a_hat,
        phi_tilde=product_estimator(a_hat),
        phi_hat=lag_num.ratio(lag_den),
        b_r=b_r,
        b_total=lag_den.as_float(),
        n_cycles=n_cycles,
        degenerate_flags=flags,
    )
