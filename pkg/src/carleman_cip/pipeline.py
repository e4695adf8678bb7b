"""End-to-end steps shared by the command line and the tests."""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from .forward import BoundaryData, add_noise, correct_near_origin, extract_boundary_data, solve_forward
from .model import CoefficientProfile, ForwardGrid
from .preprocess import (
    Envelope,
    TimeSeries,
    envelope_truncate,
    scale_calibration,
    select_envelope,
    tikhonov_derivative,
)

log = logging.getLogger(__name__)


def differentiate(data: BoundaryData, reg: float = 1e-4) -> BoundaryData:
    """Attach g1 = regularized derivative of g0."""
    g1 = tikhonov_derivative(TimeSeries(data.times, data.g0), reg).values
    return replace(data, g1=g1)


def simulate_data(
    c: CoefficientProfile,
    grid: ForwardGrid,
    eps: float,
    delta: float = 0.0,
    seed: int = 0,
    reg: float = 1e-4,
    t_window: float = 0.26,
) -> BoundaryData:
    """Forward solve, sample at eps, correct, add noise, correct again, differentiate.

    The early-time value is known exactly, so it is restored after the noise.
    """
    u = solve_forward(c, grid)
    data = extract_boundary_data(u, eps)
    data = correct_near_origin(data, t_window=t_window)
    data = add_noise(data, delta, seed)
    data = correct_near_origin(data, t_window=t_window)
    return differentiate(data, reg)


def experimental_data(
    raw: TimeSeries,
    medium: str,
    window: float = 0.5,
    baseline: float = 0.5,
    use_envelope: bool = True,
    reg: float = 1e-4,
) -> tuple[BoundaryData, Envelope | None]:
    """Calibrate a raw trace and turn it into boundary data.

    The processed trace is the scattered part of the signal and is added to
    ``baseline``, the value of u(eps, t) in a homogeneous medium.
    """
    f = scale_calibration(raw, medium)
    side = None
    if use_envelope:
        side = select_envelope(f)
        f = envelope_truncate(f, side, window)
    g0 = baseline + np.asarray(f.values)
    data = BoundaryData(f.times, g0)
    return differentiate(data, reg), side
