"""Regularized differentiation of noisy data and the operators that turn a
raw radar trace into boundary data and a target dielectric constant."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import CoefficientProfile, _frozen

CALIBRATION = {"air": 534592.0, "ground": 265223.0}


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(self.times) < 3:
            raise ValueError("a time series needs at least 3 samples")
        steps = np.diff(self.times)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-6 * steps.mean():
            raise ValueError("time samples must be uniformly spaced and increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


class Envelope(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


Interval = tuple[float, float]


@dataclass(frozen=True)
class TargetContext:
    """Background dielectric constant, the subinterval D occupied by the target,
    and the medium (selects the calibration factor)."""

    c_bckgr: float | Interval
    domain: Interval
    medium: str = "air"

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("target domain D must be a nonempty interval")
        bg = self.c_bckgr if isinstance(self.c_bckgr, tuple) else (self.c_bckgr,)
        if min(bg) <= 0:
            raise ValueError("background dielectric constant must be positive")
        if self.medium not in CALIBRATION:
            raise ValueError(f"medium must be one of {sorted(CALIBRATION)}")


def tikhonov_derivative(g: TimeSeries, reg: float = 1e-4) -> TimeSeries:
    """Derivative of noisy ``g`` by Tikhonov regularization.

    Finds v minimizing ``|K v - (g - g(t0))|^2 + reg (|v|^2 + |v'|^2)`` in
    discrete L2, where K is cumulative trapezoid integration from t0.
    """
    if not reg > 0:
        raise ValueError("regularization weight must be positive")
    n, h = len(g.times), g.dt
    K = np.tril(np.full((n, n), h))
    K[:, 0] = h / 2
    K[np.diag_indices(n)] = h / 2
    K[0, 0] = 0.0
    D = (np.eye(n, k=1) - np.eye(n))[:-1] / h
    s = np.sqrt(h)
    A = np.vstack([s * K, np.sqrt(reg) * s * np.eye(n), np.sqrt(reg) * s * D])
    b = np.concatenate([s * (g.values - g.values[0]), np.zeros(2 * n - 1)])
    v = scipy.linalg.lstsq(A, b)[0]
    return TimeSeries(g.times, v)


def scale_calibration(f: TimeSeries, medium: str) -> TimeSeries:
    """Divide a raw trace by the calibration factor of its medium."""
    try:
        mu = CALIBRATION[medium]
    except KeyError:
        raise ValueError(f"medium must be one of {sorted(CALIBRATION)}") from None
    return TimeSeries(f.times, f.values / mu)


def local_extrema(values) -> tuple[np.ndarray, np.ndarray]:
    """Interior local extrema of a sampled signal.

    An extremum is a strict sign change of the first difference; a flat run
    between the two changes is represented by its midpoint sample. Returns
    (indices, kinds) with kind +1 for a maximum and -1 for a minimum.
    """
    s = np.sign(np.diff(np.asarray(values, dtype=float)))
    nz = np.flatnonzero(s)
    idx, kind = [], []
    for a, b in zip(nz[:-1], nz[1:]):
        if s[a] != s[b]:
            idx.append((a + 1 + b) // 2)
            kind.append(1 if s[a] > 0 else -1)
    return np.array(idx, dtype=int), np.array(kind, dtype=int)


def select_envelope(f: TimeSeries) -> Envelope:
    """Pick the envelope side from the three extrema of largest magnitude.

    Ordered in time, if the middle one is a minimum the lower envelope is used,
    otherwise the upper one.
    """
    idx, kind = local_extrema(f.values)
    if len(idx) < 3:
        raise ValueError(
            f"envelope selection needs at least 3 local extrema, found {len(idx)}; "
            "check that the trace contains the target response"
        )
    top = np.argsort(-np.abs(f.values[idx]), kind="stable")[:3]
    middle = np.sort(idx[top])[1]
    return Envelope.LOWER if kind[idx == middle][0] < 0 else Envelope.UPPER


def envelope(f: TimeSeries, side: Envelope) -> np.ndarray:
    """Piecewise-linear envelope through the local extrema of one side.

    The envelope is clipped by the signal itself so that it bounds f at every
    sample, and equals f outside the span of those extrema (so a monotone
    signal is its own envelope).
    """
    idx, kind = local_extrema(f.values)
    sel = idx[kind == (-1 if side is Envelope.LOWER else 1)]
    env = np.array(f.values)
    if len(sel) == 0:
        return env
    span = slice(sel[0], sel[-1] + 1)
    line = np.interp(f.times[span], f.times[sel], f.values[sel])
    env[span] = np.minimum(line, env[span]) if side is Envelope.LOWER else np.maximum(line, env[span])
    return env


def envelope_truncate(f: TimeSeries, side: Envelope, window: float = 0.5) -> TimeSeries:
    """Envelope of ``f`` kept only within ``window`` of its global extremum.

    The extremum is the minimum for the lower envelope and the maximum for the
    upper one; all other samples are set to zero.
    """
    if not window > 0:
        raise ValueError("truncation window must be positive")
    if not np.all(np.isfinite(f.values)):
        raise ValueError("cannot build an envelope of non-finite data")
    env = envelope(f, side)
    k = int(np.argmin(env) if side is Envelope.LOWER else np.argmax(env))
    keep = np.abs(f.times - f.times[k]) <= window
    return TimeSeries(f.times, np.where(keep, env, 0.0))


def _scale(c_bckgr, factor):
    if isinstance(c_bckgr, tuple):
        return (c_bckgr[0] * factor, c_bckgr[1] * factor)
    return c_bckgr * factor


def relative_dielectric(c_target: CoefficientProfile, ctx: TargetContext):
    """Relative profile c_rel and the computed target constant c_comp.

    ``c_target`` is the reconstruction in a medium whose background is
    normalized to 1, i.e. the ratio c_target / c_bckgr. On D, c_rel is that
    ratio when its maximum exceeds 1, and the constant minimum ratio otherwise;
    c_rel = 1 off D. c_comp = c_bckgr * max c_rel if max c_rel > 1, else
    c_bckgr * min c_rel. An interval background gives an interval c_comp.
    """
    x = c_target.x
    lo, hi = ctx.domain
    on = (x >= lo) & (x <= hi)
    if not on.any():
        raise ValueError(f"target domain [{lo}, {hi}] contains no profile nodes")
    ratio = np.asarray(c_target.values)
    rel = np.ones_like(ratio)
    if ratio[on].max() > 1:
        rel[on] = ratio[on]
    else:
        rel[on] = ratio[on].min()
    factor = rel.max() if rel.max() > 1 else rel.min()
    return CoefficientProfile(x, rel, c_target.cmax), _scale(ctx.c_bckgr, float(factor))
