"""Samplers for the limiting laws of the scaled estimation errors.

Each draw combines an amplitude ``X_0 + zeta`` built from a forward
innovation stream with reversed-law sums built from an independent stream
``u*``:

    zeta     = sum_{l>=0} phi^(-l-1) U_l^(P)
    zeta*_r  = sum_{j>=1} phi^(-j) u*_{jP-r}
    zeta*    = sum_r (A_{r+1}^P)^(-1) sum_k A_{r-k+1}^r sum_{j>=1} phi^(-j) u*_{jP-r+k}

All series are truncated at a depth ``L`` picked so that the geometric tail
bound ``|phi|^(-L) * scale / (|phi| - 1)`` is below ``tol``.

Draws are produced in fixed-size chunks, each with its own derived
generator, so results depend only on ``(inputs, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from par1 import rng
from par1.errors import NotExplosive, Par1Error
from par1.innovation import (
    InnovationSpec,
    block_U_matrix,
    forward_values,
    reversed_values,
)
from par1.model import PARModel, cyclic_product, head_products, phi, tail_products
from par1.simulate import InitialLaw

CHUNK = 1024
DEFAULT_TOL = 1e-10
MAX_REDRAWS = 100

KINDS = ("zeta", "zeta_star", "a_r", "tilde", "hat")


@dataclass
class LimitLawSample:
    kind: str
    values: np.ndarray = field(repr=False)
    truncation_depth: int
    tail_bound: float
    rejections: int = 0
    r: int | None = None

    def header(self) -> dict:
        out = {
            "kind": self.kind,
            "n_draws": int(self.values.shape[0]),
            "truncation_depth": self.truncation_depth,
            "tail_bound": self.tail_bound,
            "rejections": self.rejections,
        }
        if self.r is not None:
            out["r"] = self.r
        return out


def truncation_depth(phi_abs: float, scale: float, tol: float) -> int:
    """Smallest ``L >= 1`` with ``phi_abs^(-L) * scale / (phi_abs - 1) <= tol``."""
    if scale <= 0:
        return 1
    L = math.ceil(math.log(scale / ((phi_abs - 1) * tol)) / math.log(phi_abs))
    return max(L, 1)


def tail_bound(phi_abs: float, scale: float, L: int) -> float:
    return phi_abs ** (-L) * scale / (phi_abs - 1)


def hat_offset_weights(model: PARModel) -> np.ndarray:
    """``g[d + P]``: total weight of ``u*_{jP+d}`` in ``zeta*``, ``d = -P..P-2``."""
    P = model.period
    inv_tail = 1.0 / tail_products(model)  # (A_{r+1}^P)^(-1)
    g = np.zeros(2 * P - 1)
    for r in range(1, P + 1):
        for k in range(P):
            g[k - r + P] += inv_tail[r - 1] * cyclic_product(model, r - k + 1, r)
    return g


def _series_scales(model: PARModel, spec: InnovationSpec) -> dict[str, float]:
    s = spec.rms_max
    return {
        "zeta": s * float(np.sum(np.abs(tail_products(model)))),
        "zeta_star": s,
        "hat": s * float(np.sum(np.abs(hat_offset_weights(model)))),
    }


def _require_explosive(model: PARModel) -> float:
    ph = phi(model)
    if abs(ph) <= 1:
        raise NotExplosive(ph)
    return ph


# -- series on given streams -------------------------------------------------

def zeta_series(model: PARModel, u: np.ndarray, L: int) -> np.ndarray:
    """``sum_{l<L} phi^(-l-1) U_l^(P)`` for forward values ``u`` (last axis)."""
    ph = phi(model)
    U = block_U_matrix(model, u, L)[..., -1]
    return U @ np.power(ph, -np.arange(1, L + 1, dtype=float))


def zeta_star_series(model: PARModel, ustar: np.ndarray, L: int) -> np.ndarray:
    """``(zeta*_1..zeta*_P)`` truncated at ``j = L``; ``ustar[..., k]`` is ``u*_k``."""
    ph = phi(model)
    P = model.period
    w = np.power(ph, -np.arange(1, L + 1, dtype=float))
    cols = [ustar[..., P - r : L * P - r + 1 : P] @ w for r in range(1, P + 1)]
    return np.stack(cols, axis=-1)


def hat_star_series(model: PARModel, ustar: np.ndarray, L: int) -> np.ndarray:
    """``zeta*`` truncated at ``j = L``; needs ``u*_0..u*_{(L+1)P-2}``."""
    ph = phi(model)
    P = model.period
    w = np.power(ph, -np.arange(1, L + 1, dtype=float))
    g = hat_offset_weights(model)
    out = np.zeros(ustar.shape[:-1])
    for i, gd in enumerate(g):
        if gd == 0.0:
            continue
        d = i - P
        out += gd * (ustar[..., P + d : L * P + d + 1 : P] @ w)
    return out


# -- batched draws -----------------------------------------------------------

@dataclass
class _Draws:
    x0: np.ndarray
    zeta: np.ndarray
    zstar: np.ndarray  # (rows, P)
    hat: np.ndarray


def _draw_block(
    model: PARModel,
    spec: InnovationSpec,
    x0_law: InitialLaw,
    L: int,
    rows: int,
    seed: int,
    keys: tuple[int, ...],
) -> _Draws:
    P = model.period
    g_x0 = rng.generator(seed, rng.INITIAL, spec.seed_label, *keys)
    g_fwd = rng.generator(seed, rng.ZETA, spec.seed_label, *keys)
    g_rev = rng.generator(seed, rng.ZETA_STAR, spec.seed_label, *keys)
    x0 = x0_law.draw(g_x0, rows)
    u = forward_values(spec, L * P, g_fwd, rows)
    ustar = reversed_values(spec, (L + 1) * P, g_rev, rows)
    return _Draws(
        x0=x0,
        zeta=zeta_series(model, u, L),
        zstar=zeta_star_series(model, ustar, L),
        hat=hat_star_series(model, ustar, L),
    )


def _draws(
    model: PARModel, spec: InnovationSpec, x0_law: InitialLaw, L: int, n_draws: int, seed: int
) -> tuple[_Draws, int]:
    """``n_draws`` joint draws; rows with ``X_0 + zeta == 0`` are redrawn."""
    parts = []
    rejections = 0
    for c, start in enumerate(range(0, n_draws, CHUNK)):
        rows = min(CHUNK, n_draws - start)
        d = _draw_block(model, spec, x0_law, L, rows, seed, (c,))
        bad = np.flatnonzero(d.x0 + d.zeta == 0.0)
        for i in bad:
            for attempt in range(MAX_REDRAWS):
                rejections += 1
                nd = _draw_block(model, spec, x0_law, L, 1, seed, (c, int(i), attempt, rng.REDRAW))
                if nd.x0[0] + nd.zeta[0] != 0.0:
                    d.x0[i], d.zeta[i] = nd.x0[0], nd.zeta[0]
                    d.zstar[i], d.hat[i] = nd.zstar[0], nd.hat[0]
                    break
            else:
                raise Par1Error(
                    "X_0 + zeta is identically zero; the limit law is undefined "
                    "(check x0 and the innovation law)"
                )
        parts.append(d)
    out = _Draws(
        x0=np.concatenate([p.x0 for p in parts]),
        zeta=np.concatenate([p.zeta for p in parts]),
        zstar=np.concatenate([p.zstar for p in parts]),
        hat=np.concatenate([p.hat for p in parts]),
    )
    return out, rejections


def _depth(model: PARModel, spec: InnovationSpec, tol: float, which: str) -> tuple[int, float]:
    if tol <= 0:
        raise ValueError("tol must be positive")
    ph = _require_explosive(model)
    scales = _series_scales(model, spec)
    scale = max(scales.values()) if which == "all" else scales[which]
    L = truncation_depth(abs(ph), scale, tol)
    return L, tail_bound(abs(ph), scale, L)


def sample_zeta(
    model: PARModel, spec: InnovationSpec, tol: float = DEFAULT_TOL, n_draws: int = 1000, seed: int = 0
) -> LimitLawSample:
    """Independent draws of ``zeta``."""
    L, bound = _depth(model, spec, tol, "zeta")
    P = model.period
    vals = []
    for c, start in enumerate(range(0, n_draws, CHUNK)):
        rows = min(CHUNK, n_draws - start)
        g = rng.generator(seed, rng.ZETA, spec.seed_label, c)
        vals.append(zeta_series(model, forward_values(spec, L * P, g, rows), L))
    return LimitLawSample("zeta", np.concatenate(vals), L, bound)


def sample_zeta_star_vector(
    model: PARModel, spec: InnovationSpec, tol: float = DEFAULT_TOL, n_draws: int = 1000, seed: int = 0
) -> LimitLawSample:
    """Rows of ``(zeta*_1, ..., zeta*_P)``, one reversed-law stream per row.

    ``values`` has shape ``(n_draws, P)``.
    """
    L, bound = _depth(model, spec, tol, "zeta_star")
    P = model.period
    vals = []
    for c, start in enumerate(range(0, n_draws, CHUNK)):
        rows = min(CHUNK, n_draws - start)
        g = rng.generator(seed, rng.ZETA_STAR, spec.seed_label, c)
        vals.append(zeta_star_series(model, reversed_values(spec, L * P, g, rows), L))
    return LimitLawSample("zeta_star", np.concatenate(vals), L, bound)


def sample_limit_a(
    model: PARModel,
    spec: InnovationSpec,
    r: int,
    x0_law: InitialLaw | float = 1.0,
    tol: float = DEFAULT_TOL,
    n_draws: int = 1000,
    seed: int = 0,
) -> LimitLawSample:
    """Draws of ``(phi^2 - 1) zeta*_r / (A_1^{r-1} (X_0 + zeta))``, the limit of ``phi^n (a_hat_r - a_r)``."""
    P = model.period
    if not 1 <= r <= P:
        raise ValueError(f"phase r={r} outside 1..{P}")
    x0_law = InitialLaw.from_value(x0_law)
    L, bound = _depth(model, spec, tol, "all")
    ph = phi(model)
    d, rej = _draws(model, spec, x0_law, L, n_draws, seed)
    head = head_products(model)[r - 1]
    vals = (ph**2 - 1) * d.zstar[:, r - 1] / (head * (d.x0 + d.zeta))
    return LimitLawSample("a_r", vals, L, bound, rej, r=r)


def sample_limit_tilde_phi(
    model: PARModel,
    spec: InnovationSpec,
    x0_law: InitialLaw | float = 1.0,
    tol: float = DEFAULT_TOL,
    n_draws: int = 1000,
    seed: int = 0,
) -> LimitLawSample:
    """Draws of ``(phi^2 - 1) / (X_0 + zeta) * sum_r A_{r+1}^P zeta*_r``, the limit for the product estimator."""
    x0_law = InitialLaw.from_value(x0_law)
    L, bound = _depth(model, spec, tol, "all")
    ph = phi(model)
    d, rej = _draws(model, spec, x0_law, L, n_draws, seed)
    vals = (ph**2 - 1) / (d.x0 + d.zeta) * (d.zstar @ tail_products(model))
    return LimitLawSample("tilde", vals, L, bound, rej)


def sample_limit_hat_phi(
    model: PARModel,
    spec: InnovationSpec,
    x0_law: InitialLaw | float = 1.0,
    tol: float = DEFAULT_TOL,
    n_draws: int = 1000,
    seed: int = 0,
) -> LimitLawSample:
    """Draws of ``(phi^2 - 1) zeta* / (sum_r (A_{r+1}^P)^(-2) (X_0 + zeta))``, the limit for the lag-P estimator."""
    x0_law = InitialLaw.from_value(x0_law)
    L, bound = _depth(model, spec, tol, "all")
    ph = phi(model)
    d, rej = _draws(model, spec, x0_law, L, n_draws, seed)
    weight = float(np.sum(tail_products(model) ** -2.0))
    vals = (ph**2 - 1) * d.hat / (weight * (d.x0 + d.zeta))
    return LimitLawSample("hat", vals, L, bound, rej)


def sample_limit(kind: str, model: PARModel, spec: InnovationSpec, **kw) -> LimitLawSample:
    """Dispatch on ``kind`` in ``{"a_r", "tilde", "hat"}``."""
    if kind == "a_r":
        return sample_limit_a(model, spec, **kw)
    kw.pop("r", None)
    if kind == "tilde":
        return sample_limit_tilde_phi(model, spec, **kw)
    if kind == "hat":
        return sample_limit_hat_phi(model, spec, **kw)
    raise ValueError(f"unknown limit kind {kind!r}")
