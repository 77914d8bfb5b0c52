"""Truncated explicit formula for Psi and the partial-summation identity.

    Psi(X) = X + sum_{|t_j| <= T} X^{1/2 + i t_j}/(1/2 + i t_j) + O((X/T) log^2 X),
    valid for 2 < T <= X^{1/2}/log^2 X.

The sum over +-t_j is twice the real part of the sum over t_j > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arithmetic import PsiStep, psi
from .errors import ValidationError
from .spectrum import SpectralTable


def explicit_t_limit(X: float) -> float:
    """Upper end X^{1/2}/log^2 X of the admissible truncation range."""
    return math.sqrt(X) / math.log(X) ** 2


def check_explicit_range(X: float, T: float) -> None:
    if not (T > 2 and T <= explicit_t_limit(X)):
        raise ValidationError(
            f"T outside explicit-formula range: need 2 < T <= {explicit_t_limit(X):.6g}, got T={T:g}")


def _terms(X: float, T: float, table: SpectralTable) -> tuple[np.ndarray, np.ndarray]:
    if not X > 2:
        raise ValidationError(f"X must exceed 2, got {X}")
    table.require(T)
    t = table.upto(T)
    s = 0.5 + 1j * t
    return t, np.exp(s * math.log(X)) / s


def psi_spectral(X: float, T: float, table: SpectralTable, force: bool = False) -> float:
    """X + 2 Re sum_{t_j <= T} X^{1/2+it_j}/(1/2+it_j)."""
    if not force:
        check_explicit_range(X, T)
    _, terms = _terms(X, T, table)
    return X + 2.0 * float(np.sum(terms).real)


@dataclass(frozen=True)
class ExplicitReport:
    X: float
    T: float
    psi_exact: float
    psi_spectral: float
    residual: float
    bound: float
    forced: bool = False


def explicit_report(X: float, T: float, spectrum: PsiStep, table: SpectralTable,
                    force: bool = False) -> ExplicitReport:
    forced = False
    if force:
        try:
            check_explicit_range(X, T)
        except ValidationError:
            forced = True
    exact = psi(X, spectrum)
    spec = psi_spectral(X, T, table, force=force)
    return ExplicitReport(X, T, exact, spec, exact - spec,
                          X / T * math.log(X) ** 2, forced)


def default_truncation(X: float, table: SpectralTable) -> float:
    """T = X^{1/2}/log^2 X, capped at the table coverage."""
    return min(explicit_t_limit(X), table.coverage)


def partial_summation_check(X: float, T: float, table: SpectralTable) -> float:
    """Relative gap between the direct sum and its partial-summation form.

    RHS = X^{1/2} R(X,T)/(1/2+iT) + i X^{1/2} int_1^T R(X,U)/(1/2+iU)^2 dU,
    with the U-integral done exactly: R(X, .) is constant between consecutive
    t_j and i/(1/2+iU) is an antiderivative of 1/(1/2+iU)^2.
    """
    t, terms = _terms(X, T, table)
    if t.size and t[0] < 1:
        raise ValidationError("partial summation from U=1 needs every t_j >= 1")
    lhs = complex(np.sum(terms))
    if t.size == 0:
        return 0.0
    lx = math.log(X)
    phases = np.exp(1j * t * lx)
    running = np.cumsum(phases)  # R(X, U) on [t_j, t_{j+1})
    upper = np.append(t[1:], T)

    def F(u):
        return 1j / (0.5 + 1j * u)

    integral = complex(np.sum(running * (F(upper) - F(t))))
    root = math.sqrt(X)
    rhs = root * running[-1] / (0.5 + 1j * T) + 1j * root * integral
    return abs(lhs - rhs) / (abs(lhs) + 1e-30)


def mean_abs_residual(A: float, T: float, spectrum: PsiStep, table: SpectralTable,
                      points: int = 64) -> float:
    """Average |Psi - psi_spectral| over a uniform X grid on [A, 2A] (range not enforced)."""
    xs = np.linspace(A, 2 * A, points)
    return float(np.mean([abs(psi(x, spectrum) - psi_spectral(x, T, table, force=True))
                          for x in xs]))
