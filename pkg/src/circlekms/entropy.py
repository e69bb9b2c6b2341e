"""Topological entropy of piecewise-linear circle maps.

Three routes, in decreasing order of precision:

* uniform-slope shortcut -- a map whose pieces all have absolute slope
  a > 1 has entropy log a exactly (its scaled measure is Lebesgue);
* Markov route -- when the breakpoint orbits close into a finite
  forward-invariant set, the entropy is the log of the Perron root of the
  exact covering matrix, enclosed rigorously with rational
  Collatz-Wielandt bounds;
* bracket route -- (1/n) log of the maximal preimage count ("crossing
  count") gives a submultiplicative upper-bound sequence, paired with a
  heuristic lower estimate from the preimage count of one sample point.

Lap counts of wrapping circle maps (piece images longer than one turn) are
not submultiplicative and can undershoot the entropy, so the bracket is
built on crossing counts, which majorize every per-point preimage count
and compose correctly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from .circlemap import (
    CircleMapPL,
    CirclePoint,
    iterate_branches,
    max_crossing_count,
    preimages,
)
from .errors import ResourceLimitError
from .limits import DEFAULT_LIMITS, Limits

__all__ = [
    "EntropyResult",
    "MarkovData",
    "entropy_uniform",
    "markov_entropy",
    "entropy_bracket",
    "best_entropy",
    "AdmissibilityCertificate",
    "certify_q_above_entropy",
    "crossing_count_cached",
    "log_fraction",
]


def log_fraction(x: Fraction) -> float:
    x = Fraction(x)
    return math.log(x.numerator) - math.log(x.denominator)


def _format_log(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return f"log({x.numerator})"
    return f"log({x.numerator}/{x.denominator})"


@dataclass(frozen=True)
class EntropyResult:
    """Entropy value plus how it was obtained and how much it is trusted.

    exact_base is the rational a with h = log a when one is certified;
    enclosure is a rational interval for e^h on the Markov route.
    """

    method: str  # "uniform-slope" | "markov" | "lap-bracket"
    exact_form: Optional[str]
    exact_base: Optional[Fraction]
    decimal: float
    upper_bounds: tuple[tuple[int, float], ...]
    lower_estimate: Optional[tuple[int, float]]
    certified: bool
    enclosure: Optional[tuple[Fraction, Fraction]] = None

    def to_dict(self):
        return {
            "method": self.method,
            "exact_form": self.exact_form,
            "decimal": self.decimal,
            "upper_bounds": [[n, b] for n, b in self.upper_bounds],
            "lower_estimate": list(self.lower_estimate)
            if self.lower_estimate
            else None,
            "certified": self.certified,
        }


@dataclass(frozen=True)
class MarkovData:
    """Exact covering data over a finite forward-invariant partition."""

    partition: tuple[tuple[Fraction, Fraction], ...]
    transition_matrix: tuple[tuple[int, ...], ...]
    spectral_radius: tuple[Fraction, Fraction]


def entropy_uniform(cmap: CircleMapPL) -> Optional[EntropyResult]:
    """log(a) when every piece has the same absolute slope a > 1."""
    a = cmap.uniform_slope
    if a is None or a <= 1:
        return None
    return EntropyResult(
        method="uniform-slope",
        exact_form=_format_log(a),
        exact_base=a,
        decimal=log_fraction(a),
        upper_bounds=(),
        lower_estimate=None,
        certified=True,
    )


# -- Markov route ------------------------------------------------------------


def _forward_closure(cmap: CircleMapPL, orbit_depth: int):
    """Finite phi-invariant point set containing the breakpoints, or None."""
    points = {CirclePoint(b).position for b in cmap.breakpoints}
    frontier = set(points)
    for _ in range(orbit_depth + 1):
        if not frontier:
            return sorted(points)
        nxt = set()
        for p in frontier:
            q = cmap(CirclePoint(p)).position
            if q not in points:
                nxt.add(q)
        points |= nxt
        frontier = nxt
        if len(points) > 4096:
            return None
    return None


def _covering_matrix(cmap: CircleMapPL, endpoints):
    """M[i][j] = number of times phi(arc_i) covers arc_j, exactly."""
    arcs = []
    for i, a in enumerate(endpoints):
        b = endpoints[i + 1] if i + 1 < len(endpoints) else Fraction(1)
        arcs.append((a, b))
    matrix = []
    for a, b in arcs:
        ylo = cmap.lift(a)
        yhi = cmap.lift(b if b != 1 else Fraction(1))
        ylo, yhi = (ylo, yhi) if ylo <= yhi else (yhi, ylo)
        row = []
        for aj, bj in arcs:
            lo_m = ylo - aj
            hi_m = yhi - bj
            count = math.floor(hi_m) - math.ceil(lo_m) + 1
            row.append(max(count, 0))
        matrix.append(row)
    return arcs, matrix


def _reachability(matrix):
    n = len(matrix)
    reach = [[matrix[i][j] > 0 or i == j for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                row_k = reach[k]
                row_i = reach[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    return reach


def _strongly_connected_components(matrix):
    reach = _reachability(matrix)
    n = len(matrix)
    seen = set()
    comps = []
    for i in range(n):
        if i in seen:
            continue
        comp = [j for j in range(n) if reach[i][j] and reach[j][i]]
        seen.update(comp)
        comps.append(comp)
    return comps


def perron_enclosure(
    matrix, tol: Fraction = Fraction(1, 10**9), max_iter: int = 20000
) -> tuple[Fraction, Fraction]:
    """Rational enclosure of the spectral radius of a nonnegative integer
    matrix.

    Per strongly connected component, Collatz-Wielandt bounds for
    B = I + M_S (primitive when the component is nontrivial) are iterated
    with exact integer vectors; the global radius is the maximum over
    components of rho(B) - 1.
    """
    best_lo, best_hi = Fraction(0), Fraction(0)
    for comp in _strongly_connected_components(matrix):
        if len(comp) == 1:
            i = comp[0]
            rho = Fraction(matrix[i][i])
            lo = hi = rho
        else:
            sub = [[matrix[i][j] for j in comp] for i in comp]
            k = len(sub)
            b = [[sub[i][j] + (1 if i == j else 0) for j in range(k)] for i in range(k)]
            x = [1] * k
            lo, hi = Fraction(0), Fraction(10) ** 12
            for _ in range(max_iter):
                y = [sum(b[i][j] * x[j] for j in range(k)) for i in range(k)]
                ratios = [Fraction(y[i], x[i]) for i in range(k)]
                lo = max(lo, min(ratios))
                hi = min(hi, max(ratios))
                if hi - lo <= tol or lo == hi:
                    break
                g = math.gcd(*y)
                x = [v // g for v in y]
            lo, hi = lo - 1, hi - 1
        if lo > best_lo:
            best_lo = lo
        if hi > best_hi:
            best_hi = hi
    return best_lo, best_hi


def markov_entropy(
    cmap: CircleMapPL, orbit_depth: int = 32, limits: Limits = DEFAULT_LIMITS
) -> Optional[tuple[EntropyResult, MarkovData]]:
    """Perron-root entropy when the breakpoint orbits close, else None."""
    endpoints = _forward_closure(cmap, orbit_depth)
    if endpoints is None:
        return None
    arcs, matrix = _covering_matrix(cmap, endpoints)
    lo, hi = perron_enclosure(matrix)
    if hi <= 1:
        return None  # entropy would be <= 0; not a meaningful certificate
    data = MarkovData(
        partition=tuple(arcs),
        transition_matrix=tuple(tuple(r) for r in matrix),
        spectral_radius=(lo, hi),
    )
    exact = lo == hi
    mid = (lo + hi) / 2
    result = EntropyResult(
        method="markov",
        exact_form=_format_log(lo) if exact else None,
        exact_base=lo if exact else None,
        decimal=log_fraction(mid),
        upper_bounds=(),
        lower_estimate=None,
        certified=bool(hi - lo <= Fraction(1, 10**9)),
        enclosure=(lo, hi),
    )
    return result, data


# -- bracket route -----------------------------------------------------------


@lru_cache(maxsize=None)
def _crossing_cached(cmap: CircleMapPL, n: int, max_branches: int):
    limits = Limits(max_branches=max_branches)
    try:
        return max_crossing_count(cmap, n, limits)
    except ResourceLimitError:
        return None  # cache the failure; the budget will not change

def crossing_count_cached(
    cmap: CircleMapPL, n: int, limits: Limits = DEFAULT_LIMITS
) -> int:
    """Cached maximal preimage count of phi^n (exact)."""
    result = _crossing_cached(cmap, n, limits.max_branches)
    if result is None:
        raise ResourceLimitError("max_branches", limits.max_branches)
    return result


def entropy_bracket(
    cmap: CircleMapPL,
    n_max: int = 4,
    limits: Limits = DEFAULT_LIMITS,
    seed: int = 7,
) -> EntropyResult:
    """Crossing-count upper bounds plus a heuristic preimage lower estimate."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    bounds = []
    for n in range(1, n_max + 1):
        m_n = crossing_count_cached(cmap, n, limits)
        bounds.append((n, math.log(m_n) / n))
    rng = random.Random(seed)
    denom = 999983  # large prime keeps the sample off every breakpoint orbit
    y = CirclePoint(Fraction(rng.randrange(1, denom), denom))
    count = len(preimages(cmap, y, n_max, limits))
    lower = (n_max, math.log(count) / n_max if count else 0.0)
    return EntropyResult(
        method="lap-bracket",
        exact_form=None,
        exact_base=None,
        decimal=min(b for _, b in bounds),
        upper_bounds=tuple(bounds),
        lower_estimate=lower,
        certified=False,
    )


def best_entropy(
    cmap: CircleMapPL,
    orbit_depth: int = 32,
    n_max: int = 4,
    limits: Limits = DEFAULT_LIMITS,
) -> EntropyResult:
    """Most precise available entropy: uniform, then Markov, then bracket."""
    res = entropy_uniform(cmap)
    if res is not None:
        return res
    mk = markov_entropy(cmap, orbit_depth, limits)
    if mk is not None:
        return mk[0]
    return entropy_bracket(cmap, n_max, limits)


# -- admissibility of an inverse temperature ---------------------------------


@dataclass(frozen=True)
class AdmissibilityCertificate:
    """Outcome of comparing q = e^{-beta} against the boundary e^{-h}."""

    status: str  # "above" | "divergent" | "undetermined"
    route: str
    detail: str


def certify_q_above_entropy(
    cmap: CircleMapPL,
    q: Fraction,
    limits: Limits = DEFAULT_LIMITS,
    anchor_branch_budget: int = 150_000,
) -> AdmissibilityCertificate:
    """Decide beta > h(phi) exactly where possible.

    Exact comparisons when the entropy base is rational (uniform or exact
    Markov); a rigorous one-sided certificate from crossing counts
    otherwise (q^n * m_n < 1 implies beta above the entropy of an exact
    map); 'undetermined' when nothing certifies either way.
    """
    a = cmap.uniform_slope
    if a is not None and a > 1:
        qstar = 1 / a
        if q < qstar:
            return AdmissibilityCertificate(
                "above", "uniform-slope", f"q < {qstar} exactly"
            )
        return AdmissibilityCertificate(
            "divergent", "uniform-slope", f"q >= {qstar} exactly"
        )
    mk = markov_entropy(cmap, limits=limits)
    if mk is not None:
        lo, hi = mk[0].enclosure
        if q * hi < 1:
            return AdmissibilityCertificate("above", "markov", f"q * {hi} < 1")
        if q * lo >= 1:
            return AdmissibilityCertificate("divergent", "markov", f"q * {lo} >= 1")
    budget = Limits(max_branches=anchor_branch_budget)
    for n in range(1, 7):
        try:
            m_n = crossing_count_cached(cmap, n, budget)
        except ResourceLimitError:
            break
        if q**n * m_n < 1:
            return AdmissibilityCertificate(
                "above", f"crossing@{n}", f"q^{n} * {m_n} < 1"
            )
    return AdmissibilityCertificate(
        "undetermined", "none", "no certificate at probed depths"
    )
