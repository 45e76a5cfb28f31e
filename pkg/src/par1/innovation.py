"""Periodically distributed innovation streams.

The construction is the modulated moving average

    u_k = cos(2 pi k / q) * v_k,    v_k = (m + 1)^(-1/2) * sum_{i=0}^{m} eps_{k+i}

with iid ``eps`` and modulation period ``q`` (6 by default, which gives
``cos(pi k / 3)``). For ``m >= 1`` the stream is m-dependent, hence strongly
mixing. Without modulation ``u_k = v_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from par1 import rng
from par1.errors import ConfigError
from par1.model import PARModel, cyclic_product, partial_product

LAWS = ("gaussian", "uniform", "constant")


@dataclass(frozen=True)
class InnovationSpec:
    """Recipe for an innovation stream.

    Parameters
    ----------
    law : {"gaussian", "uniform", "constant"}
        Law of the iid ``eps``. ``"constant"`` gives a deterministic stream
        (``value = 0`` is the zero innovation).
    sd : float
        Standard deviation of the centred Gaussian law.
    lo, hi : float
        Support of the uniform law.
    value : float
        Value of the constant law.
    m : int
        Moving-average window minus one; ``m = 0`` means ``v_k = eps_k``.
    modulated : bool
        Multiply by ``cos(2 pi k / modulation_period)``.
    modulation_period : int
    seed_label : int
        Extra key mixed into every derived seed.
    """

    law: str = "gaussian"
    sd: float = 1.0
    lo: float = -1.0
    hi: float = 1.0
    value: float = 0.0
    m: int = 0
    modulated: bool = True
    modulation_period: int = 6
    seed_label: int = 0

    def __post_init__(self) -> None:
        if self.law not in LAWS:
            raise ConfigError(f"innovation: unknown law {self.law!r} (expected one of {LAWS})")
        if self.law == "gaussian" and not (self.sd > 0 and math.isfinite(self.sd)):
            raise ConfigError(f"innovation: sd must be positive, got {self.sd!r}")
        if self.law == "uniform" and not (self.lo < self.hi):
            raise ConfigError(f"innovation: need lo < hi, got lo={self.lo!r}, hi={self.hi!r}")
        if int(self.m) != self.m or self.m < 0:
            raise ConfigError(f"innovation: m must be a non-negative integer, got {self.m!r}")
        if int(self.modulation_period) != self.modulation_period or self.modulation_period < 1:
            raise ConfigError("innovation: modulation_period must be a positive integer")

    @classmethod
    def zero(cls, **kw: Any) -> InnovationSpec:
        return cls(law="constant", value=0.0, **kw)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> InnovationSpec:
        if not isinstance(d, dict):
            raise ConfigError("innovation: expected an object")
        d = dict(d)
        law = d.pop("law", "gaussian")
        known = {"sd", "lo", "hi", "value", "m", "modulated", "modulation_period", "seed_label"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"innovation: unknown field(s) {sorted(unknown)}")
        return cls(law=law, **d)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"law": self.law}
        if self.law == "gaussian":
            out["sd"] = self.sd
        elif self.law == "uniform":
            out["lo"], out["hi"] = self.lo, self.hi
        else:
            out["value"] = self.value
        out.update(
            m=self.m,
            modulated=self.modulated,
            modulation_period=self.modulation_period,
            seed_label=self.seed_label,
        )
        return out

    # -- moments of eps ---------------------------------------------------
    @property
    def eps_mean(self) -> float:
        if self.law == "uniform":
            return 0.5 * (self.lo + self.hi)
        if self.law == "constant":
            return self.value
        return 0.0

    @property
    def eps_var(self) -> float:
        if self.law == "gaussian":
            return self.sd**2
        if self.law == "uniform":
            return (self.hi - self.lo) ** 2 / 12.0
        return 0.0

    def modulation(self, k: np.ndarray | int) -> np.ndarray:
        """Modulation factor at (1-based) index ``k``."""
        k = np.asarray(k)
        if not self.modulated:
            return np.ones(k.shape)
        q = self.modulation_period
        # (2j/q) first so that e.g. j = q/2 gives exactly cos(pi) = -1
        return np.cos(np.pi * ((2 * np.mod(k, q)) / q))

    @property
    def rms_max(self) -> float:
        """Upper bound on ``sqrt(E[u_k^2])`` over all k."""
        # |cos| reaches 1 at k = 0 mod q, so modulation does not lower the bound
        return math.sqrt(self.eps_var + self.eps_mean**2 * (self.m + 1))

    def phase_variance(self, k: int) -> float:
        """Exact ``Var[u_k]``."""
        return float(self.modulation(k) ** 2) * self.eps_var

    def autocovariance(self, s: int, t: int) -> float:
        """Exact ``Cov[u_s, u_t]`` of the construction."""
        overlap = self.m + 1 - abs(s - t)
        if overlap <= 0:
            return 0.0
        c = float(self.modulation(s) * self.modulation(t))
        return c * self.eps_var * overlap / (self.m + 1)


@dataclass(frozen=True)
class InnovationStream:
    """Realized innovation values.

    For a forward stream ``values[i]`` is ``u_{i+1}``. For a reversed-law
    stream (``reversed=True``) ``values[i]`` is ``u*_i``.
    """

    values: np.ndarray = field(repr=False)
    spec: InnovationSpec
    seed: int | None = None
    reversed: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def length(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.length

    def u(self, k: int) -> float:
        """``u_k`` with the conventional index (1-based forward, 0-based reversed)."""
        i = k if self.reversed else k - 1
        if i < 0 or i >= self.length:
            raise IndexError(f"innovation index {k} outside stream of length {self.length}")
        return float(self.values[i])


def _draw_eps(spec: InnovationSpec, gen: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    if spec.law == "gaussian":
        return gen.standard_normal(shape) * spec.sd
    if spec.law == "uniform":
        return gen.uniform(spec.lo, spec.hi, shape)
    return np.full(shape, float(spec.value))


def forward_values(
    spec: InnovationSpec, n_values: int, gen: np.random.Generator, rows: int | None = None
) -> np.ndarray:
    """``u_1..u_N`` drawn from ``gen``; a ``(rows, N)`` matrix when ``rows`` is given."""
    m = spec.m
    shape = (n_values + m,) if rows is None else (rows, n_values + m)
    eps = _draw_eps(spec, gen, shape)
    if m == 0:
        v = eps
    else:
        zeros = np.zeros(eps.shape[:-1] + (1,))
        cs = np.concatenate([zeros, np.cumsum(eps, axis=-1)], axis=-1)
        v = (cs[..., m + 1 :] - cs[..., : -(m + 1)]) / math.sqrt(m + 1)
    if spec.modulated:
        v = v * spec.modulation(np.arange(1, n_values + 1))
    return v


def _reversal_length(spec: InnovationSpec, n_values: int) -> int:
    # u*_k = u_{M-k} must start on a modulation cycle boundary to keep the law periodic
    q = spec.modulation_period if spec.modulated else 1
    return -(-n_values // q) * q


def reversed_values(
    spec: InnovationSpec, n_values: int, gen: np.random.Generator, rows: int | None = None
) -> np.ndarray:
    """``u*_0..u*_{N-1}`` with ``u*_k = u_{M-k}`` for a fresh forward block of length M."""
    M = _reversal_length(spec, n_values)
    fwd = forward_values(spec, M, gen, rows)
    # index M-k-1 holds u_{M-k}
    return fwd[..., ::-1][..., :n_values]


def _check_n(n_values: int) -> None:
    if int(n_values) != n_values or n_values < 1:
        raise ConfigError(f"n_values must be a positive integer, got {n_values!r}")


def generate(spec: InnovationSpec, n_values: int, seed: int) -> InnovationStream:
    """Innovation ``u_1..u_N``; bit-identical for identical arguments."""
    _check_n(n_values)
    gen = rng.generator(seed, rng.FORWARD, spec.seed_label)
    return InnovationStream(forward_values(spec, int(n_values), gen), spec, seed)


def reversed_law_stream(spec: InnovationSpec, n_values: int, seed: int) -> InnovationStream:
    """Stream ``u*_0..u*_{N-1}`` whose law is that of ``(u_M, ..., u_{M-N+1})``.

    ``M`` is ``N`` rounded up to a whole modulation cycle, so the law of
    ``u*`` is that of the forward stream read backwards from a cycle
    boundary. Draws come from a seed domain disjoint from :func:`generate`,
    so the result is independent of any forward stream.
    """
    _check_n(n_values)
    gen = rng.generator(seed, rng.REVERSED, spec.seed_label)
    return InnovationStream(reversed_values(spec, int(n_values), gen), spec, seed, reversed=True)


def zero_stream(spec: InnovationSpec | None, n_values: int) -> InnovationStream:
    return InnovationStream(np.zeros(n_values), spec or InnovationSpec.zero(), None)


# -- stationary blocks -------------------------------------------------------

def u_weight_matrix(model: PARModel) -> np.ndarray:
    """``W[r-1, s-1] = A_{s+1}^r`` for ``s <= r`` and 0 above the diagonal."""
    P = model.period
    W = np.zeros((P, P))
    for r in range(1, P + 1):
        for s in range(1, r + 1):
            W[r - 1, s - 1] = partial_product(model, s + 1, r)
    return W


def v_weights(model: PARModel) -> np.ndarray:
    """``w[r-1, k] = A_{r-k+1}^r`` (periodic) for ``k = 0..P-1``."""
    P = model.period
    return np.array(
        [[cyclic_product(model, r - k + 1, r) for k in range(P)] for r in range(1, P + 1)]
    )


def _values(stream: InnovationStream | np.ndarray) -> np.ndarray:
    return stream.values if isinstance(stream, InnovationStream) else np.asarray(stream, float)


def block_U(model: PARModel, stream: InnovationStream, n: int, r: int) -> float:
    """``U_n^(r) = sum_{s=1}^{r} A_{s+1}^r u_{nP+s}``; ``U_n^(0) = 0``."""
    P = model.period
    if not 0 <= r <= P:
        raise IndexError(f"phase r={r} outside 0..{P}")
    if r == 0:
        return 0.0
    u = _values(stream)
    lo, hi = n * P + 1, n * P + r
    if lo < 1 or hi > u.shape[0]:
        raise IndexError(f"U_{n}^({r}) needs u_{lo}..u_{hi}; stream has {u.shape[0]} values")
    return float(sum(partial_product(model, s + 1, r) * u[n * P + s - 1] for s in range(1, r + 1)))


def block_V(model: PARModel, stream: InnovationStream, j: int, r: int) -> float:
    """``V_j^(r) = sum_{k=0}^{P-1} A_{r-k+1}^r u_{jP+r-k}`` (products taken periodically)."""
    P = model.period
    if not 1 <= r <= P:
        raise IndexError(f"phase r={r} outside 1..{P}")
    u = _values(stream)
    lo, hi = j * P + r - (P - 1), j * P + r
    if lo < 1 or hi > u.shape[0]:
        raise IndexError(f"V_{j}^({r}) needs u_{lo}..u_{hi}; stream has {u.shape[0]} values")
    return float(
        sum(cyclic_product(model, r - k + 1, r) * u[j * P + r - k - 1] for k in range(P))
    )


def block_U_matrix(model: PARModel, stream: InnovationStream | np.ndarray, n_cycles: int) -> np.ndarray:
    """``out[l, r-1] = U_l^(r)`` for ``l = 0..n_cycles-1``."""
    P = model.period
    u = _values(stream)
    if u.shape[-1] < n_cycles * P:
        raise IndexError(f"need {n_cycles * P} innovation values, have {u.shape[-1]}")
    blocks = u[..., : n_cycles * P].reshape(u.shape[:-1] + (n_cycles, P))
    return blocks @ u_weight_matrix(model).T


def block_V_matrix(model: PARModel, stream: InnovationStream | np.ndarray, n_cycles: int) -> np.ndarray:
    """``out[j-1, r-1] = V_j^(r)`` for ``j = 1..n_cycles-1``."""
    P = model.period
    u = _values(stream)
    if u.shape[-1] < n_cycles * P:
        raise IndexError(f"need {n_cycles * P} innovation values, have {u.shape[-1]}")
    w = v_weights(model)
    out = np.zeros(u.shape[:-1] + (n_cycles - 1, P))
    for r in range(1, P + 1):
        for k in range(P):
            # u_{jP+r-k} for j = 1..n-1 sits at 0-based index jP+r-k-1
            start = P + r - k - 1
            idx = slice(start, start + (n_cycles - 1) * P, P)
            out[..., r - 1] += w[r - 1, k] * u[..., idx]
    return out


def exact_covariance_K(model: PARModel, spec: InnovationSpec, n: int, r: int) -> float:
    """Closed-form ``K_n^(r) = Cov[U_l^(r), U_{l+n}^(r)]`` for this construction."""
    P = model.period
    total = 0.0
    for s1 in range(1, r + 1):
        w1 = partial_product(model, s1 + 1, r)
        for s2 in range(1, r + 1):
            w2 = partial_product(model, s2 + 1, r)
            total += w1 * w2 * spec.autocovariance(s1, n * P + s2)
    return total


def covariance_K(
    model: PARModel, spec: InnovationSpec, n: int, r: int, n_mc: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo estimate of ``K_n^(r)`` and its standard error.

    Uses ``n_mc`` independent streams, each contributing the pair
    ``(U_0^(r), U_n^(r))``.
    """
    if n_mc < 2:
        raise ConfigError("covariance_K needs n_mc >= 2")
    P = model.period
    gen = rng.generator(seed, rng.COVARIANCE, spec.seed_label)
    u = forward_values(spec, (n + 1) * P, gen, rows=n_mc)
    U = block_U_matrix(model, u, n + 1)
    x, y = U[:, 0, r - 1], U[:, n, r - 1]
    prod = (x - x.mean()) * (y - y.mean())
    est = prod.sum() / (n_mc - 1)
    se = prod.std(ddof=1) / math.sqrt(n_mc)
    return float(est), float(se)
