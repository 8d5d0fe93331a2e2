import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    residual: float
    points: int


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> LineFit:
    """Least-squares line through (log x, log y)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError(f"A slope needs at least two points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("Log-log fits need positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    return LineFit(float(slope), float(intercept), residual, len(x))


def slope_through_origin(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    denominator = float(np.dot(x, x))
    if denominator == 0.0:
        raise ValueError("Regressor is identically zero")
    return float(np.dot(x, y) / denominator)


@dataclass(frozen=True)
class GrowthFit:
    """Best of constant, c ln(2+r) and c r^theta by linear-space residual"""

    model: str
    parameters: Dict[str, float]
    residuals: Dict[str, float]


def select_growth_model(radii: Sequence[float], values: Sequence[float]) -> GrowthFit:
    """Fit the three growth regimes and keep the lowest residual, ties to the simpler one"""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(r) < 3:
        raise ValueError(f"Growth regime selection needs at least three rows, got {len(r)}")

    constant = float(v.mean())
    log_basis = np.log(2.0 + r)
    log_scale = float(np.dot(log_basis, v) / np.dot(log_basis, log_basis))
    parameters = {
        "constant": {"c": constant},
        "log": {"c": log_scale},
    }
    predictions = {
        "constant": np.full_like(v, constant),
        "log": log_scale * log_basis,
    }
    if np.all(v > 0):
        power = loglog_slope(r, v)
        parameters["power"] = {"c": float(np.exp(power.intercept)), "theta": power.slope}
        predictions["power"] = np.exp(power.intercept) * r ** power.slope

    residuals = {name: float(np.sum((v - prediction) ** 2)) for name, prediction in predictions.items()}
    best = "constant"
    for name in ("log", "power"):
        if name not in residuals:
            continue
        threshold = residuals[best] * (1.0 - TIE_TOLERANCE) - TIE_TOLERANCE * float(np.dot(v, v))
        if residuals[name] < threshold:
            best = name
    flat = {f"{name}_{key}": value for name, entry in parameters.items() for key, value in entry.items()}
    return GrowthFit(model=best, parameters=flat, residuals=residuals)


def growth_regime(eps: float, dimension: int) -> Tuple[str, float]:
    """Growth of the corrector implied by a hole-filling exponent

    Returns ("power", 1 - eps d/2) when eps d < 2, ("log", 0) when eps d = 2
    and ("bounded", 0) otherwise.
    """
    product = eps * dimension
    if np.isclose(product, 2.0):
        return "log", 0.0
    if product < 2.0:
        return "power", 1.0 - 0.5 * product
    return "bounded", 0.0


def implied_moment_exponent(eps: float, dimension: int, beta: float = float("inf")) -> float:
    """gamma = min{1/2, min{d/2, beta} / (d (1 - eps))}"""
    if eps >= 1.0:
        return 0.5
    return float(min(0.5, min(0.5 * dimension, beta) / (dimension * (1.0 - eps))))
