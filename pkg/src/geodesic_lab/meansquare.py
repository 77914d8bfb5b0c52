"""Square-mean functionals (1/A) int_A^{2A} |.|^2 dX and their envelopes.

Psi is a step function, so the Psi-based functionals are integrated exactly
piece by piece.  Spectral sums are trigonometric polynomials in log X and
their square means have a closed form as a double sum over pairs.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .arithmetic import PsiStep, psi
from .errors import ComputeError, CoverageError, GeodesicLabError, ValidationError
from .spectrum import TAIL_FACTOR, SpectralTable

PAIR_GUARD = 20000
MERGE_REL = 1e-12


class Functional(str, Enum):
    PSI_ERROR = "PSI_ERROR"
    R_SUM = "R_SUM"
    S_SMOOTH = "S_SMOOTH"
    SHORT_INTERVAL = "SHORT_INTERVAL"


class Method(str, Enum):
    CLOSED_FORM = "CLOSED_FORM"
    PIECEWISE_EXACT = "PIECEWISE_EXACT"
    QUADRATURE = "QUADRATURE"


class Theorem(str, Enum):
    T1 = "T1"
    T2 = "T2"
    T3 = "T3"

    @classmethod
    def parse(cls, value) -> Theorem:
        if isinstance(value, cls):
            return value
        s = str(value).upper()
        if not s.startswith("T"):
            s = "T" + s
        try:
            return cls(s)
        except ValueError:
            raise ValidationError(f"unknown theorem {value!r}") from None


@dataclass(frozen=True)
class MeanSquareReport:
    functional: Functional
    A: float
    value: float
    method: Method
    T: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.value < 0:
            raise ComputeError(f"negative square mean {self.value}")
        if (self.eta is not None) != (self.functional is Functional.SHORT_INTERVAL):
            raise ValidationError("eta is required exactly for SHORT_INTERVAL")
        if (self.T is not None) != (self.functional in (Functional.R_SUM, Functional.S_SMOOTH)):
            raise ValidationError("T is required exactly for R_SUM and S_SMOOTH")


def _check_A(A: float) -> None:
    if not A > 2:
        raise ValidationError(f"A must exceed 2, got {A}")


def _require_psi(A: float, spectrum: PsiStep) -> None:
    if math.log(2 * A) > spectrum.log_x_max * (1 + 1e-15):
        raise CoverageError(f"spectrum truncated below X: need norms up to {2 * A:g}")


def _grid(A: float, inner) -> list[float]:
    # endpoints plus interior breakpoints; near-coincident points are merged
    pts = [A]
    for x in sorted(inner):
        if x - pts[-1] > MERGE_REL * A and 2 * A - x > MERGE_REL * A:
            pts.append(x)
    pts.append(2 * A)
    return pts


def _square_piece(x0: float, x1: float, u0: float, u1: float) -> float:
    # int_{x0}^{x1} u(x)^2 dx for u linear with unit or eta slope, no cancellation
    return (x1 - x0) * (u0 * u0 + u0 * u1 + u1 * u1) / 3.0


def ms_psi_error(A: float, spectrum: PsiStep) -> MeanSquareReport:
    """(1/A) int_A^{2A} (Psi(X) - X)^2 dX by exact piecewise integration."""
    _check_A(A)
    _require_psi(A, spectrum)
    lo = bisect.bisect_right(spectrum.log_norms, math.log(A))
    hi = bisect.bisect_right(spectrum.log_norms, math.log(2 * A))
    pts = _grid(A, (math.exp(x) for x in spectrum.log_norms[lo:hi]))
    pieces = []
    for x0, x1 in zip(pts, pts[1:]):
        c = psi(0.5 * (x0 + x1), spectrum)
        pieces.append(_square_piece(x0, x1, x0 - c, x1 - c))
    return MeanSquareReport(Functional.PSI_ERROR, A, math.fsum(pieces) / A,
                            Method.PIECEWISE_EXACT)


def ms_short_interval(A: float, eta: float, spectrum: PsiStep) -> MeanSquareReport:
    """(1/A) int_A^{2A} (Psi(X) - Psi(X - eta X) - eta X)^2 dX, exactly."""
    _check_A(A)
    if not 0 < eta < 0.5:
        raise ValidationError(f"eta must lie in (0, 1/2), got {eta}")
    _require_psi(A, spectrum)
    la, l2a = math.log(A), math.log(2 * A)
    shift = -math.log1p(-eta)  # log of 1/(1-eta)
    norms = spectrum.log_norms
    inner = [math.exp(x) for x in norms[bisect.bisect_right(norms, la):bisect.bisect_right(norms, l2a)]]
    lo = bisect.bisect_right(norms, la - shift)
    hi = bisect.bisect_right(norms, l2a - shift)
    inner += [math.exp(x + shift) for x in norms[lo:hi]]
    pts = _grid(A, inner)
    pieces = []
    for x0, x1 in zip(pts, pts[1:]):
        mid = 0.5 * (x0 + x1)
        c = psi(mid, spectrum) - psi((1 - eta) * mid, spectrum)
        pieces.append(_square_piece(x0, x1, eta * x0 - c, eta * x1 - c))
    return MeanSquareReport(Functional.SHORT_INTERVAL, A, math.fsum(pieces) / A,
                            Method.PIECEWISE_EXACT, eta=eta)


def pair_mean_square(A: float, t: np.ndarray, weights: np.ndarray | None = None,
                     block: int = 2048) -> float:
    """(1/A) int_A^{2A} |sum_j w_j X^{i t_j}|^2 dX via the pair closed form.

    Each pair contributes w_j w_k A^{i d} (2^{1+i d} - 1)/(1 + i d), d = t_j - t_k.
    """
    t = np.asarray(t, dtype=float)
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    la, l2 = math.log(A), math.log(2.0)
    re = im = 0.0
    scale = 0.0
    for i in range(0, t.size, block):
        d = t[i:i + block, None] - t[None, :]
        z = 1.0 + 1j * d
        terms = np.exp(1j * d * la) * (2.0 * np.exp(1j * d * l2) - 1.0) / z
        terms *= w[i:i + block, None] * w[None, :]
        s = terms.sum()
        re += s.real
        im += s.imag
        scale += np.abs(terms).sum()
    if abs(im) > 1e-8 * max(abs(re), 1e-300) and abs(im) > 1e-12 * scale:
        raise ComputeError(f"pair sum not real: imaginary part {im:.3e}")
    return float(max(re, 0.0))


def _guard(n: int) -> None:
    if n > PAIR_GUARD:
        raise ComputeError(
            f"pair-count guard exceeded ({n} > {PAIR_GUARD} eigenvalues); use ms_r_quadrature")


def ms_r_closed(A: float, T: float, table: SpectralTable) -> MeanSquareReport:
    """(1/A) int_A^{2A} |R(X, T)|^2 dX in closed form."""
    _check_A(A)
    table.require(T)
    t = table.upto(T)
    _guard(t.size)
    return MeanSquareReport(Functional.R_SUM, A, pair_mean_square(A, t),
                            Method.CLOSED_FORM, T=T)


def ms_s_smooth(A: float, T: float, table: SpectralTable) -> MeanSquareReport:
    """(1/A) int_A^{2A} |sum_j X^{i t_j} e^{-t_j/T}|^2 dX in closed form."""
    _check_A(A)
    if not T > 0:
        raise ValidationError(f"T must be positive, got {T}")
    if table.coverage < TAIL_FACTOR * T:
        raise CoverageError(
            f"tail truncation too large: coverage {table.coverage:g} < {TAIL_FACTOR:g}*T")
    t = table.array
    _guard(t.size)
    return MeanSquareReport(Functional.S_SMOOTH, A, pair_mean_square(A, t, np.exp(-t / T)),
                            Method.CLOSED_FORM, T=T)


def ms_r_quadrature(A: float, T: float, table: SpectralTable, nodes_per_cycle: int = 8,
                    order: int = 16) -> MeanSquareReport:
    """Square mean of R(X, T) by composite Gauss-Legendre in u = log X.

    Linear in the table size, so it is the route for tables beyond the pair
    guard.  Panels are sized so that each holds at most about one oscillation
    of the fastest phase t_max log X.
    """
    _check_A(A)
    table.require(T)
    t = table.upto(T)
    if t.size == 0:
        return MeanSquareReport(Functional.R_SUM, A, 0.0, Method.QUADRATURE, T=T)
    la, l2 = math.log(A), math.log(2.0)
    panels = max(4, int(math.ceil(2 * t[-1] * l2 / math.pi * nodes_per_cycle / order)))
    g, gw = np.polynomial.legendre.leggauss(order)
    edges = la + l2 * np.arange(panels + 1) / panels
    h = l2 / panels
    u = (edges[:-1, None] + h * (g[None, :] + 1) / 2).ravel()
    wts = np.tile(gw * h / 2, panels)
    total = 0.0
    for i in range(0, u.size, 4096):
        uu = u[i:i + 4096]
        r = np.exp(1j * np.outer(uu, t)).sum(axis=1)
        total += float(np.sum(wts[i:i + 4096] * np.exp(uu) * np.abs(r) ** 2))
    return MeanSquareReport(Functional.R_SUM, A, total / A, Method.QUADRATURE, T=T)


def resonance_sum(table, lo: float, hi: float) -> float:
    """Sum over pairs t_j, t_k in [lo, hi) of 1/(1 + |t_j - t_k|)."""
    if not lo < hi:
        raise ValidationError(f"need lo < hi, got [{lo}, {hi})")
    vals = table.array if isinstance(table, SpectralTable) else np.asarray(list(table), float)
    t = np.sort(vals[(vals >= lo) & (vals < hi)])
    total = 0.0
    for i in range(0, t.size, 2048):
        d = np.abs(t[i:i + 2048, None] - t[None, :])
        total += float(np.sum(1.0 / (1.0 + d)))
    return total


def _le_power(T: float, A: float, p: float) -> bool:
    # T <= A^p decided in log space with a relative slack against rounding
    return math.log(T) <= p * math.log(A) * (1 + 1e-12) + 1e-15


def envelope(theorem, A: float, T: float | None = None, eta: float | None = None) -> float:
    """Bound shape with the epsilon factor and implied constant dropped."""
    th = Theorem.parse(theorem)
    if not A > 0:
        raise ValidationError(f"A must be positive, got {A}")
    if th is Theorem.T1:
        return A ** (7 / 6)
    if th is Theorem.T2:
        if T is None:
            raise ValidationError("envelope T2 needs T")
        if not T > 0:
            raise ValidationError(f"T must be positive, got {T}")
        if _le_power(T, A, 1 / 6):
            return T**3
        if _le_power(T, A, 1 / 2):
            return A**0.25 * T**1.5
        return T**2
    if eta is None:
        raise ValidationError("envelope T3 needs eta")
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta}")
    return A**1.25 * math.sqrt(eta)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r2: float
    points: tuple[tuple[float, float], ...]


def fit_exponent(points) -> ExponentFit:
    """Least-squares line through (log A, log value)."""
    pts = [(float(a), float(v)) for a, v in points]
    if len(pts) < 3:
        raise ValidationError("fit_exponent needs at least 3 points")
    if any(not (a > 0 and v > 0) for a, v in pts):
        raise ValidationError("fit_exponent needs positive A and value")
    x = np.log([a for a, _ in pts])
    y = np.log([v for _, v in pts])
    if np.ptp(x) == 0:
        raise ValidationError("fit_exponent needs at least two distinct A")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ExponentFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0),
                       tuple(zip(x.tolist(), y.tolist())))


# ----------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    theorem: Theorem
    A: float
    T: float | None
    eta: float | None
    value: float
    envelope: float
    ratio: float
    error: str | None = None


@dataclass
class SweepResult:
    theorem: Theorem
    rows: list[SweepRow]
    fits: dict[str, ExponentFit] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def log_grid(a_min: float, a_max: float, points: int) -> list[float]:
    if points < 1 or not 0 < a_min <= a_max:
        raise ValidationError("bad grid: need 0 < a_min <= a_max and points >= 1")
    if points == 1:
        return [float(a_min)]
    return np.geomspace(a_min, a_max, points).tolist()


def theorem_eta_range(A: float) -> tuple[float, float]:
    """[A^{-1/2} log^2 A, A^{-1/6}), the short-interval theorem's eta range."""
    return A**-0.5 * math.log(A) ** 2, A ** (-1 / 6)


def wide_eta_range(A: float) -> tuple[float, float]:
    """[A^{-1/2}, A^{-1/6}): the theorem range without its log^2 A factor."""
    return A**-0.5, A ** (-1 / 6)


ETA_RULES = {"theorem": theorem_eta_range, "wide": wide_eta_range}


def eta_grid(A: float, points: int, rule: str = "theorem") -> list[float]:
    lo, hi = ETA_RULES[rule](A)
    hi = min(hi, 0.5)
    if not lo < hi:
        return []
    # right-open range: drop the upper end
    return np.geomspace(lo, hi, points + 1)[:-1].tolist()


def _row_task(task) -> SweepRow:
    th, A, T, eta, spectrum, table = task
    try:
        if th is Theorem.T1:
            value = ms_psi_error(A, spectrum).value
        elif th is Theorem.T2:
            value = ms_r_closed(A, T, table).value
        else:
            value = ms_short_interval(A, eta, spectrum).value
        env = envelope(th, A, T, eta)
        return SweepRow(th, A, T, eta, value, env, value / env)
    except GeodesicLabError as exc:
        return SweepRow(th, A, T, eta, math.nan, math.nan, math.nan, str(exc))


def _fit_or_note(result: SweepResult, key: str, pts) -> None:
    pts = [(a, v) for a, v in pts if v > 0 and math.isfinite(v)]
    if len(pts) >= 3 and len({a for a, _ in pts}) >= 2:
        result.fits[key] = fit_exponent(pts)
    else:
        result.notes.append(f"no fit for {key}: fewer than 3 positive rows")


def sweep(theorem, a_values, *, spectrum: PsiStep | None = None,
          table: SpectralTable | None = None, T_values=(), eta_values=None,
          eta_points: int = 5, eta_rule: str = "theorem", workers: int = 1) -> SweepResult:
    """Evaluate one theorem's functional over a grid and fit exponents in A.

    T1 rows: one per A.  T2 rows: T-major, then A.  T3 rows: A-major, then eta;
    eta is either the explicit ``eta_values`` (rows outside the theorem range
    dropped) or a log-spaced grid over the range chosen by ``eta_rule``.
    Rows that fail carry the error message and NaN values.
    """
    th = Theorem.parse(theorem)
    a_values = [float(a) for a in a_values]
    result = SweepResult(th, [])
    tasks = []
    if th is Theorem.T1:
        if spectrum is None:
            raise ValidationError("T1 sweep needs a length spectrum")
        tasks = [(th, A, None, None, spectrum, None) for A in a_values]
    elif th is Theorem.T2:
        if table is None or not T_values:
            raise ValidationError("T2 sweep needs a spectral table and T values")
        tasks = [(th, A, float(T), None, None, table) for T in T_values for A in a_values]
    else:
        if spectrum is None:
            raise ValidationError("T3 sweep needs a length spectrum")
        if eta_rule not in ETA_RULES:
            raise ValidationError(f"unknown eta rule {eta_rule!r}")
        lo_hi = ETA_RULES[eta_rule]
        for A in a_values:
            if eta_values is not None:
                lo, hi = lo_hi(A)
                etas = [e for e in eta_values if lo <= e < hi and e < 0.5]
            else:
                etas = eta_grid(A, eta_points, eta_rule)
            if not etas:
                lo, hi = lo_hi(A)
                result.notes.append(
                    f"A={A:.17g}: empty eta range [{lo:.6g}, {hi:.6g}) under rule '{eta_rule}'")
            tasks += [(th, A, None, e, spectrum, None) for e in etas]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_row_task, tasks))
    else:
        rows = [_row_task(t) for t in tasks]
    result.rows = rows

    if th is Theorem.T1:
        _fit_or_note(result, "T1", [(r.A, r.value) for r in rows])
    elif th is Theorem.T2:
        for T in T_values:
            _fit_or_note(result, f"T2 T={float(T):.17g}",
                         [(r.A, r.value) for r in rows if r.T == float(T)])
    else:
        _fit_or_note(result, "T3 value/eta^0.5",
                     [(r.A, r.value / math.sqrt(r.eta)) for r in rows])
    return result
