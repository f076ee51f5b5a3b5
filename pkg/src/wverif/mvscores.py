"""Multivariate kernel scores for ensemble forecasts.

Members live in columns: an ensemble is a (d, m) array, one column per
member.  Weighted variants parallel the univariate ones: threshold
weighting transforms members and observation, outcome weighting
reweights members by their own weight, vertical re-scaling damps the
kernel terms and anchors a correction at a reference point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation, DimensionMismatch, WeightedMassZero
from .uniscores import ScoreValue
from .weights import (
    MASS_FLOOR,
    ChainingFunction,
    Constant,
    WeightFunction,
)

__all__ = [
    "MvEnsemble",
    "VariogramSpec",
    "energy_score",
    "variogram_score",
    "tw_energy_score",
    "tw_variogram_score",
    "ow_energy_score",
    "vr_energy_score",
    "vr_variogram_score",
]


@dataclass(frozen=True)
class MvEnsemble:
    """Multivariate ensemble: a (d, m) array, one member per column."""

    members: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.members, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ContractViolation("members must be a (d, m) array")
        if not np.all(np.isfinite(m)):
            raise ContractViolation("ensemble members must be finite")
        object.__setattr__(self, "members", m)

    @property
    def dim(self) -> int:
        return self.members.shape[0]

    @property
    def size(self) -> int:
        return self.members.shape[1]


@dataclass(frozen=True)
class VariogramSpec:
    """Variogram score configuration.

    ``p`` is the variogram order, ``h`` the symmetric non-negative
    proximity matrix (all ones when omitted), ``x0`` the reference point
    used only by the vertically re-scaled variant (zeros when omitted).
    """

    p: float = 0.5
    h: np.ndarray | None = None
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.p <= 0.0:
            raise ContractViolation("variogram order p must be positive")
        if self.h is not None:
            h = np.asarray(self.h, dtype=float)
            if h.ndim != 2 or h.shape[0] != h.shape[1]:
                raise DimensionMismatch("h must be a square matrix")
            if np.any(h < 0.0) or not np.allclose(h, h.T):
                raise ContractViolation("h must be symmetric and non-negative")
            object.__setattr__(self, "h", h)
        if self.x0 is not None:
            object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))

    def weights_for(self, d: int) -> np.ndarray:
        if self.h is None:
            return np.ones((d, d))
        if self.h.shape != (d, d):
            raise DimensionMismatch(f"h has shape {self.h.shape}, expected {(d, d)}")
        return self.h

    def reference_for(self, d: int) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(d)
        if self.x0.shape != (d,):
            raise DimensionMismatch(f"x0 has shape {self.x0.shape}, expected ({d},)")
        return self.x0


def _as_mv(forecast) -> MvEnsemble:
    if isinstance(forecast, MvEnsemble):
        return forecast
    return MvEnsemble(np.asarray(forecast, dtype=float))


def _check_obs(y, d: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (d,):
        raise DimensionMismatch(f"observation has shape {y.shape}, expected ({d},)")
    if not np.all(np.isfinite(y)):
        raise ContractViolation("observation must be finite")
    return y


def _member_weights(w: WeightFunction, pts: np.ndarray) -> np.ndarray:
    """Weight of each row of ``pts`` (n, d)."""
    if isinstance(w, Constant):
        return np.ones(pts.shape[0])
    if w.dim != pts.shape[1]:
        raise DimensionMismatch(
            f"weight dimension {w.dim} does not match ensemble dimension {pts.shape[1]}"
        )
    return np.asarray(w(pts), dtype=float)


def _point_weight(w: WeightFunction, y: np.ndarray) -> float:
    if isinstance(w, Constant):
        return 1.0
    return float(w(y))


def _pair_norms(x: np.ndarray) -> np.ndarray:
    # x is (m, d); returns (m, m) Euclidean distances.
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def _transform(chaining: ChainingFunction, ens: MvEnsemble, y: np.ndarray):
    """Apply a chaining function to members (d, m) and observation (d,)."""
    if chaining.dim == 1:
        tm = np.asarray(chaining.transform(ens.members), dtype=float)
        ty = np.asarray(chaining.transform(y), dtype=float)
        return tm, ty
    if chaining.dim != ens.dim:
        raise DimensionMismatch(
            f"chaining dimension {chaining.dim} does not match ensemble dimension {ens.dim}"
        )
    tm = np.asarray(chaining.transform(ens.members.T), dtype=float).T
    ty = np.asarray(chaining.transform(y[None, :]), dtype=float)[0]
    return tm, ty


# ---------------------------------------------------------------------------
# energy score family
# ---------------------------------------------------------------------------


def _energy_core(x: np.ndarray, y: np.ndarray, fair: bool) -> float:
    m = x.shape[0]
    term1 = np.mean(np.sqrt(np.sum((x - y) ** 2, axis=1)))
    if m == 1:
        spread = 0.0
    else:
        denom = m * (m - 1) if fair else m * m
        spread = _pair_norms(x).sum() / (2.0 * denom)
    return float(term1 - spread)


def energy_score(forecast, y, fair: bool = False) -> ScoreValue:
    """Energy score of a multivariate ensemble.

    mean ||x_k - y|| - (1 / 2 m^2) sum_kl ||x_k - x_l||; reduces to the
    ensemble CRPS in one dimension.
    """
    ens = _as_mv(forecast)
    y = _check_obs(y, ens.dim)
    if fair and ens.size < 2:
        raise ContractViolation("the fair variant needs at least two members")
    return ScoreValue(_energy_core(ens.members.T, y, fair), "es", {"fair": fair})


def tw_energy_score(forecast, y, chaining: ChainingFunction, fair: bool = False) -> ScoreValue:
    """Energy score after passing members and observation through a
    chaining function (componentwise if the chaining is univariate)."""
    ens = _as_mv(forecast)
    y = _check_obs(y, ens.dim)
    tm, ty = _transform(chaining, ens, y)
    if fair and ens.size < 2:
        raise ContractViolation("the fair variant needs at least two members")
    value = _energy_core(tm.T, ty, fair)
    return ScoreValue(value, "twes", {"chaining": repr(chaining), "fair": fair})


def ow_energy_score(forecast, y, w: WeightFunction) -> ScoreValue:
    """Outcome-weighted energy score via member reweighting.

    Members are reweighted by their own weight; the result is scaled by
    w(y) and is zero when w(y) = 0.
    """
    ens = _as_mv(forecast)
    y = _check_obs(y, ens.dim)
    params = {"weight": repr(w)}
    wy = _point_weight(w, y)
    if wy == 0.0:
        return ScoreValue(0.0, "owes", params)
    x = ens.members.T
    wx = _member_weights(w, x)
    total = float(wx.sum())
    if total <= MASS_FLOOR:
        raise WeightedMassZero(
            f"ensemble weight mass is {total:.3e}, below the floor"
        )
    pi = wx / total
    term1 = np.sum(pi * np.sqrt(np.sum((x - y) ** 2, axis=1)))
    spread = 0.5 * float(pi @ _pair_norms(x) @ pi)
    return ScoreValue(wy * (term1 - spread), "owes", params)


def vr_energy_score(forecast, y, w: WeightFunction, x0=None) -> ScoreValue:
    """Vertically re-scaled energy score anchored at ``x0`` (zeros by default)."""
    ens = _as_mv(forecast)
    y = _check_obs(y, ens.dim)
    x0 = np.zeros(ens.dim) if x0 is None else _check_obs(x0, ens.dim)
    params = {"weight": repr(w), "x0": x0.tolist()}
    x = ens.members.T
    m = ens.size
    wx = _member_weights(w, x)
    wy = _point_weight(w, y)
    dist_y = np.sqrt(np.sum((x - y) ** 2, axis=1))
    dist_0 = np.sqrt(np.sum((x - x0) ** 2, axis=1))
    term1 = np.mean(dist_y * wx) * wy
    term2 = float((wx[:, None] * wx[None, :] * _pair_norms(x)).sum()) / (2.0 * m * m)
    term3 = (np.mean(dist_0 * wx) - np.sqrt(np.sum((y - x0) ** 2)) * wy) * (
        np.mean(wx) - wy
    )
    return ScoreValue(term1 - term2 + term3, "vres", params)


# ---------------------------------------------------------------------------
# variogram score family
# ---------------------------------------------------------------------------


def _vario_matrices(x: np.ndarray, p: float) -> np.ndarray:
    # x is (m, d); returns (m, d, d) of |x_i - x_j|^p per member.
    return np.abs(x[:, :, None] - x[:, None, :]) ** p


def _variogram_core(x: np.ndarray, y: np.ndarray, p: float, h: np.ndarray) -> float:
    gx = _vario_matrices(x, p).mean(axis=0)
    gy = np.abs(y[:, None] - y[None, :]) ** p
    return float(np.sum(h * (gx - gy) ** 2))


def variogram_score(forecast, y, spec: VariogramSpec | None = None) -> ScoreValue:
    """Variogram score of order p (0.5 by default).

    Compares ensemble-mean pairwise increments |x_i - x_j|^p with the
    observed increments, summed over component pairs with proximity
    weights h.
    """
    spec = spec or VariogramSpec()
    ens = _as_mv(forecast)
    y = _check_obs(y, ens.dim)
    h = spec.weights_for(ens.dim)
    value = _variogram_core(ens.members.T, y, spec.p, h)
    return ScoreValue(value, "vs", {"p": spec.p})


def tw_variogram_score(
    forecast, y, chaining: ChainingFunction, spec: VariogramSpec | None = None
) -> ScoreValue:
    """Variogram score on chained members and observation."""
    spec = spec or VariogramSpec()
    ens = _as_mv(forecast)
    y = _check_obs(y, ens.dim)
    tm, ty = _transform(chaining, ens, y)
    h = spec.weights_for(ens.dim)
    value = _variogram_core(tm.T, ty, spec.p, h)
    return ScoreValue(value, "twvs", {"p": spec.p, "chaining": repr(chaining)})


def _vario_kernel(gu: np.ndarray, gz: np.ndarray, h: np.ndarray) -> float:
    return float(np.sum(h * (gu - gz) ** 2))


def vr_variogram_score(
    forecast, y, w: WeightFunction, spec: VariogramSpec | None = None
) -> ScoreValue:
    """Vertically re-scaled variogram score.

    Applies the same re-scaling pattern as the energy variant to the
    variogram kernel; the reference point comes from ``spec.x0``.
    """
    spec = spec or VariogramSpec()
    ens = _as_mv(forecast)
    y = _check_obs(y, ens.dim)
    h = spec.weights_for(ens.dim)
    x0 = spec.reference_for(ens.dim)
    x = ens.members.T
    m = ens.size
    wx = _member_weights(w, x)
    wy = _point_weight(w, y)

    gx = _vario_matrices(x, spec.p)  # (m, d, d)
    gy = np.abs(y[:, None] - y[None, :]) ** spec.p
    g0 = np.abs(x0[:, None] - x0[None, :]) ** spec.p

    rho_y = np.einsum("ij,kij->k", h, (gx - gy) ** 2)
    rho_0 = np.einsum("ij,kij->k", h, (gx - g0) ** 2)
    diff_pairs = gx[:, None, :, :] - gx[None, :, :, :]
    rho_pairs = np.einsum("ij,klij->kl", h, diff_pairs**2)

    term1 = np.mean(rho_y * wx) * wy
    term2 = float((wx[:, None] * wx[None, :] * rho_pairs).sum()) / (2.0 * m * m)
    term3 = (np.mean(rho_0 * wx) - _vario_kernel(gy, g0, h) * wy) * (np.mean(wx) - wy)
    value = term1 - term2 + term3
    return ScoreValue(value, "vrvs", {"p": spec.p, "weight": repr(w)})
