"""Periodic AR(1) coefficient structure.

Coefficients are stored 0-based but every public accessor takes 1-based
phase indices, so ``model.coeff(1)`` is the first coefficient ``a_1`` and
``a_{P+r} = a_r``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from par1.errors import ConfigError

REGIME_EPS = 1e-12


class Regime(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    EXPLOSIVE = "explosive"


@dataclass(frozen=True)
class PARModel:
    """PAR(1) model ``X_k = a_k X_{k-1} + u_k`` with ``a_{k+P} = a_k``."""

    period: int
    coeffs: tuple[float, ...] = field()

    def __post_init__(self) -> None:
        if not isinstance(self.period, (int, np.integer)) or self.period < 1:
            raise ConfigError(f"period must be a positive integer, got {self.period!r}")
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != self.period:
            raise ConfigError(
                f"coeffs has {len(coeffs)} entries but period is {self.period}"
            )
        if not all(math.isfinite(c) for c in coeffs):
            raise ConfigError("coeffs must all be finite")
        object.__setattr__(self, "period", int(self.period))
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[float]) -> PARModel:
        return cls(period=len(coeffs), coeffs=tuple(coeffs))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PARModel:
        try:
            coeffs = d["coeffs"]
        except (KeyError, TypeError) as exc:
            raise ConfigError("model: missing field 'coeffs'") from exc
        period = d.get("period", len(coeffs))
        return cls(period=period, coeffs=tuple(coeffs))

    def to_dict(self) -> dict[str, Any]:
        return {"period": self.period, "coeffs": list(self.coeffs)}

    @property
    def a(self) -> np.ndarray:
        """Coefficients as a 0-based float array (``a[0]`` is ``a_1``)."""
        return np.asarray(self.coeffs, dtype=float)

    def coeff(self, k: int) -> float:
        """``a_k`` for any integer ``k``, using periodicity."""
        return self.coeffs[(k - 1) % self.period]

    @property
    def phi(self) -> float:
        return phi(self)

    @property
    def regime(self) -> Regime:
        return regime(self)


def partial_product(model: PARModel, s: int, r: int) -> float:
    """Partial product ``A_s^r``.

    Returns 1 when ``r == s - 1``, the product ``a_s * ... * a_r`` when
    ``1 <= s <= r``, and 0 otherwise.
    """
    if r == s - 1:
        return 1.0
    if 1 <= s <= r:
        out = 1.0
        for j in range(s, r + 1):
            out *= model.coeff(j)
        return out
    return 0.0


def cyclic_product(model: PARModel, s: int, r: int) -> float:
    """Product ``a_s * ... * a_r`` taken along the periodic sequence.

    Unlike :func:`partial_product` this accepts ``s <= 0`` (the indices wrap
    with period P); an empty range gives 1. Needed for the lag-P blocks where
    the product runs across a cycle boundary.
    """
    if r < s - 1:
        return 0.0
    out = 1.0
    for j in range(s, r + 1):
        out *= model.coeff(j)
    return out


def phi(model: PARModel) -> float:
    """Product of the coefficients, accumulated left to right."""
    out = 1.0
    for c in model.coeffs:
        out *= c
    return out


def regime(model: PARModel, eps: float = REGIME_EPS) -> Regime:
    mod = abs(phi(model))
    if abs(mod - 1.0) <= eps:
        return Regime.UNSTABLE
    return Regime.STABLE if mod < 1.0 else Regime.EXPLOSIVE


def head_products(model: PARModel) -> np.ndarray:
    """``(A_1^0, A_1^1, ..., A_1^P)`` as an array of length P + 1."""
    return np.array([partial_product(model, 1, r) for r in range(model.period + 1)])


def tail_products(model: PARModel) -> np.ndarray:
    """``(A_2^P, A_3^P, ..., A_{P+1}^P)``, i.e. entry ``s-1`` is ``A_{s+1}^P``."""
    P = model.period
    return np.array([partial_product(model, s + 1, P) for s in range(1, P + 1)])


# Coefficient families used in the simulation study.
FAMILIES: dict[int, PARModel] = {
    1: PARModel(6, (0.8, 1.2, 1, 1.5, 1.1, 0.9)),
    2: PARModel(6, (0.8, 1.1, 1, 1.5, 1.1, 0.7)),
    3: PARModel(6, (0.5, 1, 1, 2.5, 1.6, 0.5)),
    4: PARModel(6, (0.5, 1, 1.5, 1.62, 1.6, 0.5)),
}
