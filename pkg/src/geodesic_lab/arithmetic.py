"""Length spectrum of the modular surface and the counting function Psi.

Hyperbolic conjugacy classes of PSL(2,Z) with trace t >= 3 are in bijection
with proper equivalence classes of binary quadratic forms of discriminant
t^2 - 4 (primitive or not).  Writing t^2 - 4 = f^2 D0, the classes of content
f are counted by the narrow class number h(D0), and every such class is the
k-th power of a primitive class of length 2 log eps(D0), where
eps(D0) = (t0 + u0 sqrt(D0))/2 is the fundamental solution of t0^2 - D0 u0^2 = 4.

All norms are handled in log space: the class of trace t has
log N = 2 acosh(t/2).
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ComputeError, CoverageError, ValidationError

INT64_MAX = 2**63 - 1
MAX_POWER_INDEX = 64


def _check_width(n: int, what: str) -> int:
    if abs(n) > INT64_MAX:
        raise ComputeError(f"integer overflow: {what} exceeds 64 bits")
    return n


def factorize(n: int) -> dict[int, int]:
    """Prime factorisation of n >= 1 by trial division."""
    if n < 1:
        raise ValidationError(f"cannot factorise {n}")
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _square_divisors_from(factors: dict[int, int]) -> list[int]:
    divs = [1]
    for p, e in factors.items():
        divs = [d * p**i for d in divs for i in range(e // 2 + 1)]
    return sorted(divs)


def square_divisors(D: int) -> list[int]:
    """All f >= 1 with f^2 | D, ascending."""
    if D < 1:
        raise ValidationError(f"square_divisors needs D >= 1, got {D}")
    _check_width(D, "D")
    return _square_divisors_from(factorize(D))


def is_discriminant(D: int) -> bool:
    if D <= 0 or D % 4 not in (0, 1):
        return False
    r = math.isqrt(D)
    return r * r != D


def _require_discriminant(D0: int) -> None:
    if not is_discriminant(D0):
        raise ValidationError(f"{D0} is not a discriminant")


def is_reduced(form: tuple[int, int, int], D: int) -> bool:
    """|sqrt(D) - 2|a|| < b < sqrt(D), decided in exact integer arithmetic."""
    a, b, _ = form
    if b <= 0 or b * b >= D:
        return False
    r = math.isqrt(D)  # D is not a square, so x < sqrt(D) <=> x <= r
    return 2 * abs(a) - b <= r and 2 * abs(a) + b > r


def reduced_forms(D0: int) -> list[tuple[int, int, int]]:
    """Primitive reduced forms (a, b, c) of discriminant D0, sorted."""
    _require_discriminant(D0)
    r = math.isqrt(D0)
    bs = np.arange(D0 % 2 or 2, r + 1, 2, dtype=np.int64)
    if bs.size == 0:
        return []
    m = (D0 - bs * bs) // 4  # a * c = -m
    a = np.arange(1, r + 1, dtype=np.int64)[:, None]
    mask = (2 * a - bs[None, :] <= r) & (2 * a + bs[None, :] > r)
    mask &= (m[None, :] % a) == 0
    ai, bi = np.nonzero(mask)
    forms = []
    for av, bv, mv in zip(a[ai, 0].tolist(), bs[bi].tolist(), m[bi].tolist()):
        c = mv // av
        if math.gcd(math.gcd(av, bv), c) != 1:
            continue
        forms.append((av, bv, -c))
        forms.append((-av, bv, c))
    return sorted(forms)


def reduction_neighbor(form: tuple[int, int, int], D: int) -> tuple[int, int, int]:
    """Right neighbour (c, b', a') of a reduced form.

    b' is the unique b' = -b (mod 2|c|) with sqrt(D) - 2|c| < b' < sqrt(D).
    The map is the proper equivalence x -> y, y -> -x + s y.
    """
    _, b, c = form
    r = math.isqrt(D)
    m = 2 * abs(c)
    b2 = r - (r + b) % m
    a2 = (b2 * b2 - D) // (4 * c)
    return (c, b2, a2)


@lru_cache(maxsize=None)
def class_number(D0: int) -> int:
    """Narrow class number: number of cycles of reduced primitive forms."""
    forms = reduced_forms(D0)
    seen: set[tuple[int, int, int]] = set()
    cycles = 0
    for start in forms:
        if start in seen:
            continue
        cycles += 1
        f = start
        while f not in seen:
            seen.add(f)
            f = reduction_neighbor(f, D0)
    if len(seen) != len(forms):
        raise ComputeError(f"reduction cycles left the reduced set for D={D0}")
    return cycles


def _pell_search(D0: int, bound: int) -> tuple[int, int] | None:
    # t0 = sqrt(D0 u^2 + 4) increases with u, so the first hit is minimal
    u = 1
    while True:
        t2 = D0 * u * u + 4
        _check_width(t2, "t0^2")
        t0 = math.isqrt(t2)
        if t0 > bound:
            return None
        if t0 * t0 == t2:
            return t0, u
        u += 1


def pell_fundamental(D0: int, bound: int = 10**9) -> tuple[int, int]:
    """Minimal (t0, u0), t0 >= 3, with t0^2 - D0 u0^2 = 4 and t0 <= bound."""
    _require_discriminant(D0)
    sol = _pell_search(D0, bound)
    if sol is None:
        raise ComputeError(f"fundamental solution above bound {bound} for D={D0}")
    return sol


def trace_power(t0: int, k: int) -> int:
    """Trace of M^k when tr M = t0 (Chebyshev-type recurrence)."""
    if k < 1:
        raise ValidationError(f"power index must be positive, got {k}")
    prev, cur = 2, t0
    for _ in range(k - 1):
        prev, cur = cur, _check_width(t0 * cur - prev, "trace_power")
    return _check_width(cur, "trace_power")


def log_norm(t: int) -> float:
    """log N of the class with trace t, i.e. 2 log((t + sqrt(t^2-4))/2)."""
    return 2.0 * math.acosh(t / 2.0)


@dataclass(frozen=True)
class PrimitiveDiscriminant:
    D0: int
    t0: int
    u0: int
    h: int

    @property
    def log_eps(self) -> float:
        return math.acosh(self.t0 / 2.0)


@dataclass(frozen=True)
class ClassEntry:
    D0: int
    f: int
    h: int
    k: int
    Lambda: float


@dataclass(frozen=True)
class TraceClassData:
    t: int
    entries: tuple[ClassEntry, ...]
    log_norm: float

    @property
    def jump(self) -> float:
        return math.fsum(e.h * e.Lambda for e in self.entries)

    @property
    def class_count(self) -> int:
        return sum(e.h for e in self.entries)


def trace_classes(t: int) -> TraceClassData:
    """Conjugacy-class data for all hyperbolic classes of trace t."""
    if t < 3:
        raise ValidationError(f"hyperbolic traces start at 3, got {t}")
    disc = _check_width(t * t - 4, "t^2 - 4")
    factors = factorize(t - 2)
    for p, e in factorize(t + 2).items():
        factors[p] = factors.get(p, 0) + e
    entries = []
    for f in _square_divisors_from(factors):
        D0 = disc // (f * f)
        if not is_discriminant(D0):
            continue
        t0, u0 = pell_fundamental(D0, bound=t)
        for k in range(1, MAX_POWER_INDEX + 1):
            tk = trace_power(t0, k)
            if tk >= t:
                break
        if tk != t:
            raise ComputeError(f"power-index consistency failure at t={t}, D0={D0}")
        entries.append(ClassEntry(D0=D0, f=f, h=class_number(D0), k=k,
                                  Lambda=2.0 * math.acosh(t0 / 2.0)))
    return TraceClassData(t=t, entries=tuple(entries), log_norm=log_norm(t))


@dataclass(frozen=True)
class PsiStep:
    """Exact step function X -> Psi(X), valid for X <= exp(log_x_max)."""

    traces: tuple[int, ...]
    log_norms: tuple[float, ...]
    jumps: tuple[float, ...]
    prefix: tuple[float, ...]
    log_x_max: float

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.log_norms, self.jumps))

    @property
    def x_max(self) -> float:
        return math.exp(self.log_x_max)

    def norms(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_norms))

    def truncated(self, X: float) -> PsiStep:
        """The same step function restricted to norms <= X."""
        lx = math.log(X)
        if lx > self.log_x_max:
            raise CoverageError("spectrum truncated below X")
        n = bisect.bisect_right(self.log_norms, lx)
        return PsiStep(self.traces[:n], self.log_norms[:n], self.jumps[:n],
                       self.prefix[:n], lx)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trace", "log_norm", "jump"])
        for t, ln, j in zip(self.traces, self.log_norms, self.jumps):
            w.writerow([t, f"{ln:.17g}", f"{j:.17g}"])
        return buf.getvalue()


def max_trace(X: float) -> int:
    """Largest trace t with log N(t) <= log X (0 if none)."""
    lx = math.log(X)
    t = int(math.floor(2.0 * math.cosh(lx / 2.0))) + 1
    while t >= 3 and log_norm(t) > lx:
        t -= 1
    return t if t >= 3 else 0


def _jumps_for(traces: list[int]) -> list[tuple[int, float]]:
    out = []
    for t in traces:
        data = trace_classes(t)
        out.append((t, data.jump))
    return out


def length_spectrum(X: float, workers: int = 1) -> PsiStep:
    """All breakpoints of Psi up to X, built trace by trace."""
    if not X > 4:
        raise ValidationError(f"length_spectrum needs X > 4, got {X}")
    t_hi = max_trace(X)
    _check_width(t_hi * t_hi, "t^2")
    traces = list(range(3, t_hi + 1))
    if workers > 1 and len(traces) > 64:
        # interleaved chunks balance the cost, which grows with t
        chunks = [traces[i::workers * 4] for i in range(workers * 4)]
        with ProcessPoolExecutor(workers) as ex:
            pairs = [p for part in ex.map(_jumps_for, chunks) for p in part]
        pairs.sort()
    else:
        pairs = _jumps_for(traces)
    jumps = tuple(j for _, j in pairs)
    prefix = []
    acc = 0.0
    for j in jumps:
        acc += j
        prefix.append(acc)
    return PsiStep(
        traces=tuple(t for t, _ in pairs),
        log_norms=tuple(log_norm(t) for t, _ in pairs),
        jumps=jumps,
        prefix=tuple(prefix),
        log_x_max=math.log(X),
    )


def psi(X: float, spectrum: PsiStep) -> float:
    """Psi(X): sum of Lambda(P) over closed geodesics with N(P) <= X."""
    if X <= 0:
        raise ValidationError(f"psi needs X > 0, got {X}")
    lx = math.log(X)
    if lx > spectrum.log_x_max * (1 + 1e-15):
        raise CoverageError("spectrum truncated below X")
    n = bisect.bisect_right(spectrum.log_norms, lx)
    return spectrum.prefix[n - 1] if n else 0.0


def primitive_discriminants(X: float) -> list[PrimitiveDiscriminant]:
    """Discriminants whose primitive geodesics have norm eps^2 <= X."""
    t_hi = max_trace(X)
    out = []
    for D0 in range(5, t_hi * t_hi - 3):
        if not is_discriminant(D0):
            continue
        sol = _pell_search(D0, t_hi)
        if sol is None:
            continue
        out.append(PrimitiveDiscriminant(D0, sol[0], sol[1], class_number(D0)))
    return out


def class_multiset_by_trace(X: float) -> Counter:
    """Multiset of (Lambda, k, h) over all classes with norm <= X, trace first."""
    out: Counter = Counter()
    for t in range(3, max_trace(X) + 1):
        for e in trace_classes(t).entries:
            out[(e.Lambda, e.k, e.h)] += 1
    return out


def class_multiset_by_discriminant(X: float) -> Counter:
    """The same multiset, built discriminant first from powers of eps(D0)."""
    out: Counter = Counter()
    lx = math.log(X)
    for pd in primitive_discriminants(X):
        Lam = 2.0 * pd.log_eps
        k = 1
        while k * Lam <= lx * (1 + 1e-12) and log_norm(trace_power(pd.t0, k)) <= lx:
            out[(Lam, k, pd.h)] += 1
            k += 1
    return out
