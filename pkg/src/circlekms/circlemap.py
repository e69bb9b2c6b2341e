"""Exact piecewise-linear circle maps and their branch engine.

A map is stored through its lift f : [0,1] -> R, a continuous piecewise
linear function with rational breakpoints and values, f(0) in [0,1) and
f(1) - f(0) an integer (the degree).  Circle points are rationals reduced
mod 1.  All operations below -- evaluation, iterated branch decomposition,
one-sided valencies, preimages, fixed points and the bounded-depth
exactness probe -- are pure functions over exact rational data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .errors import MapSpecError, ResourceLimitError, ValidationError
from .limits import DEFAULT_LIMITS, Limits

__all__ = [
    "CirclePoint",
    "Valency",
    "CircleMapPL",
    "Branch",
    "BranchSet",
    "ArcSet",
    "parse_map",
    "format_map",
    "eval_circle",
    "iterate_branches",
    "valency",
    "preimages",
    "preimage_points",
    "fixed_points",
    "exactness_probe",
    "max_crossing_count",
]


def frac1(x: Fraction) -> Fraction:
    """Reduce a rational to [0, 1)."""
    return x - math.floor(x)


def parse_rational(token: str) -> Fraction:
    """Parse 'p/q' or an integer literal; accepts unreduced input."""
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise MapSpecError(f"malformed rational: {exc}", token=token) from exc


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True, order=True)
class CirclePoint:
    """A point e^{2*pi*i*position} with position an exact rational in [0,1)."""

    position: Fraction

    def __post_init__(self):
        p = Fraction(self.position)
        object.__setattr__(self, "position", frac1(p))

    def __str__(self):
        return format_rational(self.position)


@dataclass(frozen=True)
class Valency:
    """One-sided monotonicity signature; signs are +1 or -1."""

    left: int
    right: int

    def __post_init__(self):
        if self.left not in (1, -1) or self.right not in (1, -1):
            raise ValidationError("valency signs must be +1 or -1")

    @property
    def turning(self) -> bool:
        return self.left != self.right

    def __str__(self):
        sym = {1: "+", -1: "-"}
        return f"({sym[self.left]},{sym[self.right]})"


IDENTITY_VALENCY = Valency(1, 1)


def compose_valencies(inner: Valency, outer: Valency) -> Valency:
    """Valency of g∘h at x from inner = val(h, x) and outer = val(g, h(x)).

    A decreasing side swaps which side of h(x) is approached and reverses
    orientation, hence the flip of the opposite outer sign.
    """
    left = outer.left if inner.left == 1 else -outer.right
    right = outer.right if inner.right == 1 else -outer.left
    return Valency(left, right)


@dataclass(frozen=True)
class Piece:
    """One affine piece of a lift: t -> slope*t + intercept on [lo, hi]."""

    lo: Fraction
    hi: Fraction
    slope: Fraction
    intercept: Fraction

    def at(self, t: Fraction) -> Fraction:
        return self.slope * t + self.intercept

    def invert(self, y: Fraction) -> Fraction:
        return (y - self.intercept) / self.slope

    @property
    def sign(self) -> int:
        return 1 if self.slope > 0 else -1

    @property
    def image(self) -> tuple[Fraction, Fraction]:
        a, b = self.at(self.lo), self.at(self.hi)
        return (a, b) if a <= b else (b, a)


Branch = Piece  # a monotone affine branch of an iterate is the same shape


class CircleMapPL:
    """Continuous piecewise-linear circle map with rational data.

    breakpoints: 0 = c_0 < c_1 < ... < c_N = 1 (rationals)
    values:      lift values f(c_i); f(0) in [0,1), f(1)-f(0) integer.
    """

    def __init__(self, breakpoints, values, assume_exact: bool = False):
        bps = tuple(Fraction(b) for b in breakpoints)
        vals = tuple(Fraction(v) for v in values)
        self._validate(bps, vals)
        self.breakpoints = bps
        self.values = vals
        self.assume_exact = bool(assume_exact)
        self.degree = int(vals[-1] - vals[0])
        self._pieces = tuple(
            Piece(
                bps[i],
                bps[i + 1],
                (vals[i + 1] - vals[i]) / (bps[i + 1] - bps[i]),
                vals[i] - (vals[i + 1] - vals[i]) / (bps[i + 1] - bps[i]) * bps[i],
            )
            for i in range(len(bps) - 1)
        )

    @staticmethod
    def _validate(bps, vals):
        if len(bps) < 2:
            raise MapSpecError("need at least two breakpoints")
        if len(bps) != len(vals):
            raise MapSpecError(
                f"breakpoints/values length mismatch ({len(bps)} vs {len(vals)})"
            )
        if bps[0] != 0:
            raise MapSpecError("first breakpoint must be 0", token=str(bps[0]))
        if bps[-1] != 1:
            raise MapSpecError("last breakpoint must be 1", token=str(bps[-1]))
        for a, b in zip(bps, bps[1:]):
            if not a < b:
                raise MapSpecError(
                    "breakpoints not strictly increasing", token=format_rational(b)
                )
        if not (0 <= vals[0] < 1):
            raise MapSpecError(
                "values[0] must lie in [0,1) (lift normalization)",
                token=format_rational(vals[0]),
            )
        for a, b in zip(vals, vals[1:]):
            if a == b:
                raise MapSpecError(
                    "non-strict piece: equal adjacent values", token=format_rational(b)
                )
        if (vals[-1] - vals[0]).denominator != 1:
            raise MapSpecError(
                "values[last] - values[0] must be an integer (circle continuity)",
                token=format_rational(vals[-1]),
            )

    # -- basic queries ----------------------------------------------------

    @property
    def pieces(self) -> tuple[Piece, ...]:
        return self._pieces

    def piece_index(self, t: Fraction) -> int:
        """Index of a piece whose closed interval contains t in [0,1]."""
        lo, hi = 0, len(self._pieces) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if t <= self._pieces[mid].hi:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def lift(self, t: Fraction) -> Fraction:
        """Lift value f(t) for t in [0,1]."""
        if not (0 <= t <= 1):
            raise ValidationError(f"lift argument {t} outside [0,1]")
        return self._pieces[self.piece_index(t)].at(t)

    def lift_ext(self, t: Fraction) -> Fraction:
        """Periodic extension of the lift: f(t+1) = f(t) + degree."""
        k = math.floor(t)
        return self.lift(t - k) + k * self.degree

    def __call__(self, x: CirclePoint) -> CirclePoint:
        return CirclePoint(frac1(self.lift(x.position)))

    def val1(self, x: CirclePoint) -> Valency:
        """Valency of the map itself at x, read off the adjacent slopes."""
        p = x.position
        if p == 0:
            return Valency(self._pieces[-1].sign, self._pieces[0].sign)
        i = self.piece_index(p)
        piece = self._pieces[i]
        if p == piece.hi:  # shared breakpoint: right sign from the next piece
            return Valency(piece.sign, self._pieces[i + 1].sign)
        return Valency(piece.sign, piece.sign)

    def turning_points(self) -> list[tuple[CirclePoint, Valency]]:
        """All turning points, as circle points with their (mixed) valencies."""
        out = []
        for b in self.breakpoints[:-1]:
            pt = CirclePoint(b)
            v = self.val1(pt)
            if v.turning:
                out.append((pt, v))
        return out

    @property
    def is_locally_injective(self) -> bool:
        return not self.turning_points()

    @property
    def uniform_slope(self) -> Optional[Fraction]:
        """Common absolute slope when the map is uniformly piecewise linear."""
        mags = {abs(p.slope) for p in self._pieces}
        return mags.pop() if len(mags) == 1 else None

    @property
    def total_variation(self) -> Fraction:
        return sum(abs(p.at(p.hi) - p.at(p.lo)) for p in self._pieces)

    def __eq__(self, other):
        return (
            isinstance(other, CircleMapPL)
            and self.breakpoints == other.breakpoints
            and self.values == other.values
            and self.assume_exact == other.assume_exact
        )

    def __hash__(self):
        return hash((self.breakpoints, self.values, self.assume_exact))

    def __repr__(self):
        return (
            f"CircleMapPL(degree={self.degree}, pieces={len(self._pieces)}, "
            f"assume_exact={self.assume_exact})"
        )


# -- map-spec format -------------------------------------------------------


def parse_map(text: str) -> CircleMapPL:
    """Parse the line-based `cmap v1` map-spec format.

    '#' starts a comment; tokens are whitespace separated; rationals may be
    unreduced.  Errors name the offending token and line.
    """
    lines = text.splitlines()
    stripped = []
    for lineno, raw in enumerate(lines, start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            stripped.append((lineno, body.split()))
    if not stripped:
        raise MapSpecError("empty map specification")
    lineno, header = stripped[0]
    if header != ["cmap", "v1"]:
        raise MapSpecError("expected header 'cmap v1'", line=lineno)

    breakpoints = values = None
    assume_exact = False
    for lineno, tokens in stripped[1:]:
        key = tokens[0]
        if key == "breakpoints":
            breakpoints = [_parse_rational_at(tok, lineno) for tok in tokens[1:]]
        elif key == "values":
            values = [_parse_rational_at(tok, lineno) for tok in tokens[1:]]
        elif key == "assume-exact":
            if len(tokens) != 2 or tokens[1] not in ("true", "false"):
                raise MapSpecError(
                    "assume-exact takes 'true' or 'false'", line=lineno
                )
            assume_exact = tokens[1] == "true"
        else:
            raise MapSpecError(f"unknown directive {key!r}", line=lineno, token=key)
    if breakpoints is None:
        raise MapSpecError("missing 'breakpoints' line")
    if values is None:
        raise MapSpecError("missing 'values' line")
    try:
        return CircleMapPL(breakpoints, values, assume_exact=assume_exact)
    except MapSpecError:
        raise


def _parse_rational_at(token: str, lineno: int) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise MapSpecError(
            f"malformed rational: {exc}", line=lineno, token=token
        ) from exc


def format_map(cmap: CircleMapPL) -> str:
    """Emit the map-spec document; rationals are reduced (bit-exact contract)."""
    lines = [
        "cmap v1",
        "breakpoints " + " ".join(format_rational(b) for b in cmap.breakpoints),
        "values " + " ".join(format_rational(v) for v in cmap.values),
    ]
    if cmap.assume_exact:
        lines.append("assume-exact true")
    return "\n".join(lines) + "\n"


# -- operations ------------------------------------------------------------


def eval_circle(cmap: CircleMapPL, x: CirclePoint) -> CirclePoint:
    """phi(x) with exact mod-1 reduction."""
    return cmap(x)


@dataclass(frozen=True)
class BranchSet:
    """Monotone affine branch decomposition of the n-th iterate's lift.

    Branches are maximal affine intervals covering [0,1] with disjoint
    interiors, ordered by left endpoint.  `lap_count` merges adjacent
    branches of equal sign circularly, which is the lap number whenever the
    iterate turns at every interior branch endpoint.
    """

    iterate: int
    branches: tuple[Branch, ...]

    @property
    def lap_count(self) -> int:
        signs = [b.sign for b in self.branches]
        changes = sum(
            1 for i in range(len(signs)) if signs[i] != signs[(i + 1) % len(signs)]
        )
        return changes if changes else 1

    @property
    def degree(self) -> int:
        lift_span = self.branches[-1].at(Fraction(1)) - self.branches[0].at(
            Fraction(0)
        )
        return int(lift_span)

    def lift_at(self, t: Fraction) -> Fraction:
        for b in self.branches:
            if b.lo <= t <= b.hi:
                return b.at(t)
        raise ValidationError(f"{t} outside [0,1]")

    def valency_at(self, x: CirclePoint) -> Valency:
        """Valency of the iterate read directly off adjacent branch slopes."""
        p = x.position
        if p == 0:
            return Valency(self.branches[-1].sign, self.branches[0].sign)
        for i, b in enumerate(self.branches):
            if b.lo < p < b.hi:
                return Valency(b.sign, b.sign)
            if p == b.lo:
                return Valency(self.branches[i - 1].sign, b.sign)
        raise ValidationError(f"{p} not located in branch set")


def _refine_once(cmap: CircleMapPL, branches, limits: Limits):
    """Branches of phi^(n+1) from branches of phi^n by breakpoint pullback."""
    interior_levels = cmap.breakpoints[:-1]  # c_N = 1 is c_0 + 1 periodically
    d = cmap.degree
    out = []
    for br in branches:
        ylo, yhi = br.image
        # integer-shifted breakpoint levels strictly inside the image
        cuts = []
        for c in interior_levels:
            m = math.ceil(ylo - c)
            level = c + m
            while level <= yhi:
                if ylo < level < yhi:
                    cuts.append(br.invert(level))
                level += 1
        cuts.sort()
        knots = [br.lo] + cuts + [br.hi]
        for lo, hi in zip(knots, knots[1:]):
            mid_val = br.at((lo + hi) / 2)
            m = math.floor(mid_val)
            piece = cmap.pieces[cmap.piece_index(mid_val - m)]
            slope = piece.slope * br.slope
            intercept = piece.slope * (br.intercept - m) + piece.intercept + m * d
            out.append(Branch(lo, hi, slope, intercept))
        if len(out) > limits.max_branches:
            raise ResourceLimitError("max_branches", limits.max_branches)
    # merge neighbours that are exactly the same affine map
    merged = [out[0]]
    for br in out[1:]:
        last = merged[-1]
        if br.slope == last.slope and br.intercept == last.intercept:
            merged[-1] = Branch(last.lo, br.hi, last.slope, last.intercept)
        else:
            merged.append(br)
    return merged


def iterate_branches(
    cmap: CircleMapPL, n: int, limits: Limits = DEFAULT_LIMITS
) -> BranchSet:
    """Exact monotone branch decomposition of phi^n, ordered by left endpoint."""
    if n < 1:
        raise ValidationError("iterate must be >= 1")
    if n > limits.max_depth:
        raise ResourceLimitError("max_depth", limits.max_depth)
    branches = list(cmap.pieces)
    merged = [branches[0]]
    for br in branches[1:]:
        last = merged[-1]
        if br.slope == last.slope and br.intercept == last.intercept:
            merged[-1] = Branch(last.lo, br.hi, last.slope, last.intercept)
        else:
            merged.append(br)
    branches = merged
    for _ in range(n - 1):
        branches = _refine_once(cmap, branches, limits)
    return BranchSet(iterate=n, branches=tuple(branches))


def valency(cmap: CircleMapPL, x: CirclePoint, n: int) -> Valency:
    """Valency of phi^n at x by composing one-sided signs along the orbit."""
    if n < 0:
        raise ValidationError("iterate must be >= 0")
    acc = IDENTITY_VALENCY
    pt = x
    for _ in range(n):
        acc = compose_valencies(acc, cmap.val1(pt))
        pt = cmap(pt)
    return acc


def preimage_points(cmap: CircleMapPL, y: CirclePoint) -> list[CirclePoint]:
    """All exact solutions of phi(x) = y, sorted by position."""
    target = y.position
    found = set()
    for piece in cmap.pieces:
        ylo, yhi = piece.image
        m = math.ceil(ylo - target)
        level = target + m
        while level <= yhi:
            t = piece.invert(level)
            found.add(frac1(t))
            level += 1
    return [CirclePoint(p) for p in sorted(found)]


def preimages(
    cmap: CircleMapPL, y: CirclePoint, k: int, limits: Limits = DEFAULT_LIMITS
) -> list[tuple[CirclePoint, Valency]]:
    """All solutions of phi^k(x) = y with val(phi^k, x), sorted by position."""
    if k < 1:
        raise ValidationError("preimage depth must be >= 1")
    if k > limits.max_depth:
        raise ResourceLimitError("max_depth", limits.max_depth)
    layer = [y]
    for _ in range(k):
        nxt = set()
        for pt in layer:
            nxt.update(preimage_points(cmap, pt))
        layer = sorted(nxt)
    return [(pt, valency(cmap, pt, k)) for pt in layer]


def fixed_points(
    cmap: CircleMapPL,
) -> list[tuple[CirclePoint, bool]]:
    """Exact solutions of f(t) = t mod 1, with a criticality flag each."""
    found = set()
    for piece in cmap.pieces:
        if piece.slope == 1:
            if frac1(piece.intercept) == 0:
                raise ValidationError(
                    "piece with slope 1 and integer intercept: "
                    "continuum of fixed points"
                )
            continue
        # solve slope*t + intercept = t + m on [lo, hi)
        ylo = piece.at(piece.lo) - piece.lo
        yhi = piece.at(piece.hi) - piece.hi
        lo, hi = (ylo, yhi) if ylo <= yhi else (yhi, ylo)
        m = math.ceil(lo)
        while m <= hi:
            t = (m - piece.intercept) / (piece.slope - 1)
            if piece.lo <= t < piece.hi and 0 <= t < 1:
                found.add(t)
            m += 1
    # t = 1 solutions coincide with t = 0 and are covered by the first piece
    out = []
    for t in sorted(found):
        pt = CirclePoint(t)
        out.append((pt, cmap.val1(pt).turning))
    return out


# -- exact arc arithmetic for the exactness probe ---------------------------


class ArcSet:
    """Finite union of closed arcs on the circle with exact endpoints.

    Arcs are stored as (a, b) with 0 <= a < b <= 1; the full circle is the
    single arc (0, 1).
    """

    def __init__(self, arcs: Iterable[tuple[Fraction, Fraction]]):
        self.arcs = self._normalize(list(arcs))

    @staticmethod
    def _normalize(arcs):
        cleaned = []
        for a, b in arcs:
            length = b - a
            if length >= 1:
                return [(Fraction(0), Fraction(1))]
            start = frac1(a)
            end = start + length
            if end <= 1:
                cleaned.append((start, end))
            else:
                cleaned.append((start, Fraction(1)))
                cleaned.append((Fraction(0), end - 1))
        if not cleaned:
            return []
        cleaned.sort()
        merged = [cleaned[0]]
        for a, b in cleaned[1:]:
            la, lb = merged[-1]
            if a <= lb:
                merged[-1] = (la, max(lb, b))
            else:
                merged.append((a, b))
        return merged

    @property
    def is_full_circle(self) -> bool:
        # touching arcs are merged in _normalize, so full cover is one arc
        return len(self.arcs) == 1 and self.arcs[0] == (Fraction(0), Fraction(1))

    @property
    def total_length(self) -> Fraction:
        return sum(b - a for a, b in self.arcs)

    def image(self, cmap: CircleMapPL, limits: Limits = DEFAULT_LIMITS) -> "ArcSet":
        """phi(S), computed piecewise with exact endpoints."""
        pieces_out = []
        for a, b in self.arcs:
            for piece in cmap.pieces:
                lo = max(a, piece.lo)
                hi = min(b, piece.hi)
                if lo >= hi:
                    continue
                ylo, yhi = sorted((piece.at(lo), piece.at(hi)))
                if yhi - ylo >= 1:
                    return ArcSet([(Fraction(0), Fraction(1))])
                start = frac1(ylo)
                pieces_out.append((start, start + (yhi - ylo)))
                if len(pieces_out) > limits.max_arcs:
                    raise ResourceLimitError("max_arcs", limits.max_arcs)
        return ArcSet(pieces_out)


def exactness_probe(
    cmap: CircleMapPL,
    depth: int = 2,
    horizon: int = 8,
    limits: Limits = DEFAULT_LIMITS,
) -> str:
    """Bounded-depth sufficient certificate for topological exactness.

    Returns 'refuted-by-local-injectivity' when the map has no turning
    point, 'confirmed' when every branch interval of phi^depth maps onto the
    full circle within `horizon` steps (exact arc arithmetic), otherwise
    'inconclusive'.  A confirmation is a certificate only relative to the
    probed depth.
    """
    if cmap.is_locally_injective:
        return "refuted-by-local-injectivity"
    branchset = iterate_branches(cmap, depth, limits)
    for br in branchset.branches:
        arcs = ArcSet([(br.lo, br.hi)])
        ok = arcs.is_full_circle
        for _ in range(horizon):
            if ok:
                break
            arcs = arcs.image(cmap, limits)
            ok = arcs.is_full_circle
        if not ok:
            return "inconclusive"
    return "confirmed"


# -- crossing counts (submultiplicative preimage-growth sequence) -----------


def max_crossing_count(
    cmap: CircleMapPL, n: int, limits: Limits = DEFAULT_LIMITS
) -> int:
    """Maximum over y of the number of distinct solutions of phi^n(x) = y.

    This sequence is submultiplicative (preimages compose), so the bounds
    (1/n) log of it decrease along doubling toward the entropy of an exact
    map.  The maximum is attained on generic y, so an open-interval sweep
    over branch images is exact.
    """
    branchset = iterate_branches(cmap, n, limits)
    events = {}
    for br in branchset.branches:
        ylo, yhi = br.image
        m = math.floor(ylo)
        while m < yhi:
            a = max(ylo - m, Fraction(0))
            b = min(yhi - m, Fraction(1))
            if a < b:
                events[a] = events.get(a, 0) + 1
                events[b] = events.get(b, 0) - 1
            m += 1
    best = running = 0
    for v in sorted(events):
        running += events[v]
        best = max(best, running)
    return best
