"""Maass spectral parameters: table ingestion, Weyl's law, exponential sums.

Spectral parameters t_j > 0 label the cusp forms of PSL(2,Z) through their
Laplace eigenvalues 1/4 + t_j^2.  They are read from a text table, never
computed here.
"""

from __future__ import annotations

import bisect
import cmath
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CoverageError, ValidationError

DATA_ENV = "GEODESIC_LAB_DATA"
BUNDLED_NAME = "maass_pslz.txt"
TAIL_FACTOR = 15.0


def data_dir() -> Path:
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent / "data"


def bundled_path() -> Path:
    return data_dir() / BUNDLED_NAME


@dataclass(frozen=True)
class SpectralTable:
    """Sorted spectral parameters with provenance.

    ``coverage`` is the height up to which the table is known to be complete.
    It defaults to the largest entry; synthetic tables that are complete by
    construction use ``math.inf``.
    """

    params: tuple[float, ...]
    source: str = ""
    coverage: float = field(default=-1.0)

    def __post_init__(self):
        if self.coverage < 0:
            object.__setattr__(self, "coverage", self.t_max)

    @classmethod
    def from_values(cls, values, source: str = "", coverage: float | None = None,
                    complete: bool = False) -> SpectralTable:
        vals = tuple(float(v) for v in values)
        for i, v in enumerate(vals):
            if not v > 0:
                raise ValidationError(f"non-positive spectral parameter {v}")
            if i and v < vals[i - 1]:
                raise ValidationError(f"spectral parameters not nondecreasing at index {i}")
        if complete:
            coverage = math.inf
        return cls(vals, source, -1.0 if coverage is None else float(coverage))

    @property
    def t_max(self) -> float:
        return self.params[-1] if self.params else 0.0

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.params, dtype=float)

    def __len__(self) -> int:
        return len(self.params)

    def count(self, T: float) -> int:
        """N(T) = #{t_j <= T}."""
        return bisect.bisect_right(self.params, T)

    def upto(self, T: float) -> np.ndarray:
        return self.array[: self.count(T)]

    def require(self, T: float, what: str = "table truncated") -> None:
        if T > self.coverage:
            raise CoverageError(f"{what}: T={T:g} beyond table coverage {self.coverage:g}")


def load_spectrum(path) -> SpectralTable:
    """Parse a spectral table file.

    Lines starting with '#' are comments; the leading comment block becomes
    the ``source``.  A comment of the form ``# coverage: <float>`` declares
    the completeness height.  Every other non-blank line holds one positive
    decimal, and the entries must be nondecreasing.
    """
    path = Path(path)
    source_lines: list[str] = []
    in_header = True
    coverage = None
    values: list[float] = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                text = line[1:].strip()
                if text.lower().startswith("coverage:"):
                    try:
                        coverage = float(text.split(":", 1)[1])
                    except ValueError:
                        raise ValidationError(f"{path}: bad coverage declaration at line {lineno}")
                elif in_header:
                    source_lines.append(text)
                continue
            in_header = False
            try:
                v = float(line)
            except ValueError:
                raise ValidationError(f"{path}: malformed line {lineno}: {line!r}")
            if not (v > 0 and math.isfinite(v)):
                raise ValidationError(f"{path}: non-positive entry at line {lineno}")
            if values and v < values[-1]:
                raise ValidationError(f"{path}: not nondecreasing at line {lineno}")
            values.append(v)
    if coverage is not None and values and coverage < values[-1]:
        raise ValidationError(f"{path}: coverage {coverage} below largest entry")
    return SpectralTable(tuple(values), "\n".join(source_lines),
                         -1.0 if coverage is None else coverage)


def load_bundled() -> SpectralTable:
    return load_spectrum(bundled_path())


def weyl_residual(table: SpectralTable, T: float) -> float:
    """(N(T) - T^2/12) / (T log T)."""
    if not T > 2:
        raise ValidationError(f"weyl_residual needs T > 2, got {T}")
    if not table.params or T > table.coverage:
        raise CoverageError(f"table truncated: T={T:g} beyond {table.coverage:g}")
    return (table.count(T) - T * T / 12.0) / (T * math.log(T))


def _check_x(X: float) -> float:
    if not X > 2:
        raise ValidationError(f"X must exceed 2, got {X}")
    return math.log(X)


def r_sum(X: float, T: float, table: SpectralTable) -> complex:
    """R(X, T) = sum over t_j <= T of X^{i t_j}."""
    lx = _check_x(X)
    table.require(T, "truncated sum")
    t = table.upto(T)
    return complex(np.sum(np.exp(1j * t * lx)))


def s_smooth(X: float, T: float, table: SpectralTable) -> complex:
    """Smoothed sum over all t_j of X^{i t_j} e^{-t_j/T}."""
    lx = _check_x(X)
    if not T > 0:
        raise ValidationError(f"T must be positive, got {T}")
    if table.coverage < TAIL_FACTOR * T:
        raise CoverageError(
            f"tail truncation too large: coverage {table.coverage:g} < {TAIL_FACTOR:g}*T")
    t = table.array
    return complex(np.sum(np.exp(t * (1j * lx - 1.0 / T))))


@dataclass(frozen=True)
class TestFunctionParams:
    """Parameters (X, T) of the test function; beta = log(X)/2 + i/(2T)."""

    __test__ = False  # not a pytest class

    X: float
    T: float

    def __post_init__(self):
        if not (self.X > 2 and self.T > 2):
            raise ValidationError("test function needs X > 2 and T > 2")

    @property
    def beta(self) -> complex:
        return complex(math.log(self.X) / 2.0, 1.0 / (2.0 * self.T))


def phi_hat(t: float, p: TestFunctionParams) -> complex:
    """Bessel transform sinh(pi t + 2 i beta t)/sinh(pi t), factored form.

    X^{it} e^{-t/T} (1 - e^{-2w}) / (1 - e^{-2 pi t}), w = pi t + i t log X - t/T,
    which never forms sinh of a large argument.
    """
    if not t > 0:
        raise ValidationError(f"phi_hat needs t > 0, got {t}")
    lx = math.log(p.X)
    w = complex(math.pi * t - t / p.T, t * lx)
    lead = cmath.exp(complex(-t / p.T, t * lx))
    return lead * (1.0 - cmath.exp(-2.0 * w)) / (-math.expm1(-2.0 * math.pi * t))


def phi_hat_direct(t: float, p: TestFunctionParams) -> complex:
    """The same transform as the raw ratio of hyperbolic sines."""
    return cmath.sinh(math.pi * t + 2j * p.beta * t) / math.sinh(math.pi * t)


def phi_hat_main(t: float, p: TestFunctionParams) -> complex:
    """Main term X^{it} e^{-t/T} of the transform."""
    return cmath.exp(complex(-t / p.T, t * math.log(p.X)))
