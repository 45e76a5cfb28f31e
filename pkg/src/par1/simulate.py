"""Path simulation and the decomposition of X into trend and stationary parts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from par1.errors import ConfigError, NotExplosive, OverflowAtStep
from par1.innovation import (
    InnovationSpec,
    InnovationStream,
    block_U_matrix,
    exact_covariance_K,
)
from par1.model import PARModel, head_products, phi


@dataclass(frozen=True)
class InitialLaw:
    """Law of ``X_0``: Gaussian with the given mean and sd, deterministic if ``sd == 0``."""

    mean: float = 1.0
    sd: float = 0.0

    def __post_init__(self) -> None:
        if not (self.sd >= 0 and math.isfinite(self.sd) and math.isfinite(self.mean)):
            raise ConfigError(f"x0 law: need finite mean and sd >= 0, got {self!r}")

    @property
    def deterministic(self) -> bool:
        return self.sd == 0

    def draw(self, gen: np.random.Generator | None, size: int) -> np.ndarray:
        if self.deterministic:
            return np.full(size, float(self.mean))
        assert gen is not None
        return self.mean + self.sd * gen.standard_normal(size)

    @classmethod
    def from_value(cls, x0: Any) -> InitialLaw:
        if isinstance(x0, InitialLaw):
            return x0
        if isinstance(x0, dict):
            return cls(mean=float(x0.get("mean", 1.0)), sd=float(x0.get("sd", 0.0)))
        return cls(mean=float(x0))


@dataclass(frozen=True)
class Path:
    """Trajectory ``X_0..X_{nP}`` and the innovation that produced it."""

    x: np.ndarray = field(repr=False)
    model: PARModel
    stream: InnovationStream | None
    x0: float
    n_cycles: int

    @property
    def u(self) -> np.ndarray | None:
        """``u_1..u_{nP}`` aligned so that ``u[k-1]`` drives ``x[k]``."""
        if self.stream is None:
            return None
        return self.stream.values[: self.n_cycles * self.model.period]


@dataclass(frozen=True)
class ZSequence:
    """Partial sums ``Z_0..Z_{n-1}`` of ``sum_l phi^(-l-1) U_l^(P)``."""

    z: np.ndarray = field(repr=False)
    phi: float
    k0: float | None = None

    @property
    def zeta_hat(self) -> float:
        return float(self.z[-1]) if self.z.size else 0.0

    def at(self, n: int) -> float:
        """``Z_n`` with ``Z_{-1} = 0``."""
        return 0.0 if n < 0 else float(self.z[n])

    def tail_rms(self, n: int | None = None) -> float:
        """Bound on ``sqrt(E[(Z_n - zeta)^2])``; defaults to ``n`` of ``zeta_hat``.

        Uses ``|phi|^(-n) sqrt(K_0^(P)) / (|phi| - 1)``, which needs
        ``|phi| > 1`` and a known ``K_0^(P)``.
        """
        if self.k0 is None or abs(self.phi) <= 1:
            return math.inf
        if n is None:
            n = self.z.size - 1
        return abs(self.phi) ** (-n) * math.sqrt(self.k0) / (abs(self.phi) - 1)


def simulate_path(model: PARModel, stream: InnovationStream, x0: float, n_cycles: int) -> Path:
    """Run ``X_k = a_k X_{k-1} + u_k`` for ``k = 1..n_cycles * P``.

    Raises
    ------
    OverflowAtStep
        As soon as some ``|X_k|`` is no longer a finite double.
    """
    P = model.period
    N = n_cycles * P
    if n_cycles < 0:
        raise ConfigError("n_cycles must be non-negative")
    if stream.length < N:
        raise ConfigError(f"stream has {stream.length} values, need n_cycles*P = {N}")
    a = model.coeffs
    u = stream.values.tolist()
    x = [float(x0)] + [0.0] * N
    prev = float(x0)
    for k in range(1, N + 1):
        prev = a[(k - 1) % P] * prev + u[k - 1]
        if not math.isfinite(prev):
            raise OverflowAtStep(k)
        x[k] = prev
    out = np.asarray(x)
    out.setflags(write=False)
    return Path(out, model, stream, float(x0), int(n_cycles))


def _k0(model: PARModel, spec: InnovationSpec | None) -> float | None:
    if spec is None:
        return None
    return exact_covariance_K(model, spec, 0, model.period)


def z_sequence(
    model: PARModel, stream: InnovationStream, n_cycles: int, *, strict: bool = True
) -> ZSequence:
    """Partial sums ``Z_0..Z_{n_cycles-1}``.

    With ``strict`` (default) a non-explosive model raises
    :class:`NotExplosive`, since the series then has no limit. The partial
    sums themselves are well defined for any non-zero ``phi`` and
    ``strict=False`` returns them, e.g. to check the decomposition identity.
    """
    ph = phi(model)
    if strict and abs(ph) <= 1:
        raise NotExplosive(ph)
    if ph == 0:
        raise ConfigError("Z_n is undefined when phi == 0")
    U = block_U_matrix(model, stream, n_cycles)[:, -1]
    weights = np.power(ph, -np.arange(1, n_cycles + 1, dtype=float))
    z = np.cumsum(weights * U)
    return ZSequence(z, ph, _k0(model, stream.spec if stream is not None else None))


def decomposition_residual(path: Path, z_seq: ZSequence, n: int, r: int) -> float:
    """``X_{nP+r} - [A_1^r phi^n (X_0 + Z_{n-1}) + U_n^(r)]``."""
    model = path.model
    P = model.period
    if not (0 <= n < path.n_cycles and 1 <= r <= P):
        raise IndexError(f"(n, r) = ({n}, {r}) outside the path")
    U = block_U_matrix(model, path.stream, path.n_cycles)
    A = head_products(model)
    closed = A[r] * z_seq.phi**n * (path.x0 + z_seq.at(n - 1)) + U[n, r - 1]
    return float(path.x[n * P + r] - closed)


def decomposition_residuals(path: Path, z_seq: ZSequence) -> np.ndarray:
    """Relative residuals ``|resid| / (|X_{nP+r}| + 1)`` as an ``(n_cycles, P)`` array."""
    model = path.model
    P, n = model.period, path.n_cycles
    U = block_U_matrix(model, path.stream, n)
    A = head_products(model)[1:]
    zprev = np.concatenate([[0.0], z_seq.z[: n - 1]])
    trend = np.power(z_seq.phi, np.arange(n, dtype=float))[:, None] * (path.x0 + zprev)[:, None]
    closed = trend * A[None, :] + U
    x = path.x[1:].reshape(n, P)
    return np.abs(x - closed) / (np.abs(x) + 1.0)


def scaled_limit_gap(path: Path, z_seq: ZSequence) -> np.ndarray:
    """``|phi^(-n) X_{nP+r} - A_1^r (X_0 + zeta_hat)|`` as an ``(n_cycles, P)`` array."""
    model = path.model
    P, n = model.period, path.n_cycles
    A = head_products(model)[1:]
    scale = np.power(z_seq.phi, -np.arange(n, dtype=float))[:, None]
    x = path.x[1:].reshape(n, P)
    return np.abs(scale * x - A[None, :] * (path.x0 + z_seq.zeta_hat))
