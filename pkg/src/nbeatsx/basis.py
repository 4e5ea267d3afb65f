"""Deterministic basis matrices for trend, seasonality, exogenous, and identity stacks.

Forecast-span bases are evaluated on the grid t = [0, 1, ..., H-1]/H; backcast
bases extend the same analytic functions left of the origin on
t = [-L, ..., -1]/H, so frequencies stay continuous across the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError

BASIS_KINDS = ("trend", "seasonality", "exogenous", "identity")


@dataclass(frozen=True)
class BasisMatrix:
    kind: str
    span: str  # "backcast" or "forecast"
    matrix: np.ndarray  # span_len x n_coefficients

    @property
    def span_len(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_coefficients(self) -> int:
        return self.matrix.shape[1]


def time_grid(span: str, L: int, H: int) -> np.ndarray:
    """Discrete time grid normalized by the forecast horizon on both sides."""
    if L <= 0 or H <= 0:
        raise ValueError(f"time_grid: L and H must be positive, got L={L}, H={H}")
    if span == "forecast":
        return np.arange(H, dtype=np.float64) / H
    if span == "backcast":
        return np.arange(-L, 0, dtype=np.float64) / H
    raise ValueError(f"time_grid: span must be 'forecast' or 'backcast', got {span!r}")


def trend_basis(grid: np.ndarray, n_pol: int, span: str = "forecast") -> BasisMatrix:
    """Polynomial columns grid**i for i = 0..n_pol."""
    if n_pol < 0:
        raise ValueError(f"trend_basis: n_pol must be >= 0, got {n_pol}")
    cols = np.stack([grid ** i for i in range(n_pol + 1)], axis=1)
    return BasisMatrix("trend", span, cols)


def harmonic_basis(grid: np.ndarray, H: int, n_hr: int, span: str = "forecast") -> BasisMatrix:
    """Constant plus paired cos/sin harmonics up to floor(H/2 - 1) oscillations.

    The column count is H-1 for even H regardless of the grid's span, so
    backcast and forecast heads share the coefficient dimension.
    """
    if H < 2:
        raise ValueError(f"harmonic_basis: H must be >= 2, got {H}")
    if n_hr < 1:
        raise ValueError(f"harmonic_basis: n_hr must be >= 1, got {n_hr}")
    top = H // 2 - 1
    angles = [2.0 * np.pi * i * grid / n_hr for i in range(1, top + 1)]
    cols = [np.ones_like(grid)]
    cols += [np.cos(a) for a in angles]
    cols += [np.sin(a) for a in angles]
    return BasisMatrix("seasonality", span, np.stack(cols, axis=1))


def exogenous_basis(x_window: np.ndarray, span: str = "forecast") -> BasisMatrix:
    """The covariate window itself: the stack output is a local regression X @ theta."""
    x_window = np.asarray(x_window, dtype=np.float64)
    if x_window.ndim != 2:
        raise DataValidationError(
            f"exogenous_basis: expected a 2D covariate window, got shape {x_window.shape}")
    if not np.all(np.isfinite(x_window)):
        raise DataValidationError("exogenous_basis: covariate window contains non-finite values")
    return BasisMatrix("exogenous", span, x_window)


def identity_basis(span_len: int, span: str = "forecast") -> BasisMatrix:
    """Canonical vectors: the stack output equals the coefficient vector."""
    if span_len < 1:
        raise ValueError(f"identity_basis: span_len must be >= 1, got {span_len}")
    return BasisMatrix("identity", span, np.eye(span_len))
