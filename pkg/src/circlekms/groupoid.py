"""Finite truncations of the oriented transformation groupoid.

Over a non-pre-periodic restricted orbit every ordered pair of points is
an arrow and the isotropy is trivial, so a finite truncation is a full
pair groupoid graded by the integer cocycle c(v, w) = level(v) - level(w).
Convolution is then matrix multiplication of finitely supported kernels,
the gauge twist at q = e^{-beta} scales an entry by q^{c(v,w)}, and the
KMS and conformality identities against the truncated atomic measure are
exact rational computations with residual literally zero.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .circlemap import CircleMapPL, CirclePoint
from .errors import TruncationMismatchError, ValidationError
from .limits import DEFAULT_LIMITS, Limits
from .measures import AtomicMeasure
from .orbits import CriticalClass, OrbitAtom, enumerate_orbit_atoms

__all__ = [
    "GroupoidTruncation",
    "AlgebraElement",
    "Bisection",
    "build_truncation",
    "convolve",
    "adjoint",
    "gauge_twist",
    "omega_state",
    "kms_residual",
    "sample_bisections",
    "conformal_residual",
    "random_rational_element",
]

Scalar = Union[Fraction, int, complex]


@dataclass(frozen=True)
class GroupoidTruncation:
    """Atoms of one restricted-orbit class with the level cocycle."""

    atoms: tuple[OrbitAtom, ...]
    index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(
            self,
            "index",
            {a.point.position: i for i, a in enumerate(self.atoms)},
        )
        levels = {}
        for a in self.atoms:
            if a.point.position in levels:
                raise ValidationError(f"duplicate atom {a.point}")
            levels[a.point.position] = a.level

    def __len__(self):
        return len(self.atoms)

    def atom_index(self, point: CirclePoint) -> int:
        i = self.index.get(point.position)
        if i is None:
            raise ValidationError(f"{point} is not an atom of this truncation")
        return i

    def cocycle(self, v: int, w: int) -> int:
        """c(v, w) = level(v) - level(w) for atom indices."""
        return self.atoms[v].level - self.atoms[w].level


def build_truncation(
    cmap: CircleMapPL,
    cls: CriticalClass,
    depth: int,
    limits: Limits = DEFAULT_LIMITS,
) -> GroupoidTruncation:
    """Pair-groupoid slice over the class's atoms to the given tree depth."""
    atoms = enumerate_orbit_atoms(cmap, cls, depth, limits)
    return GroupoidTruncation(atoms=tuple(atoms))


@dataclass
class AlgebraElement:
    """Finitely supported kernel on the truncated groupoid.

    Entries map ordered atom-index pairs to scalars; rational entries keep
    every identity below exact.
    """

    truncation: GroupoidTruncation
    entries: dict[tuple[int, int], Scalar] = field(default_factory=dict)

    def set(self, v: int, w: int, value: Scalar) -> "AlgebraElement":
        if not (0 <= v < len(self.truncation) and 0 <= w < len(self.truncation)):
            raise ValidationError("entry outside the truncation")
        if value == 0:
            self.entries.pop((v, w), None)
        else:
            self.entries[(v, w)] = value
        return self

    def get(self, v: int, w: int) -> Scalar:
        return self.entries.get((v, w), 0)

    @classmethod
    def arrow(cls, truncation, v: int, w: int, value: Scalar = 1):
        return cls(truncation, {(v, w): value})

    @classmethod
    def diagonal_identity(cls, truncation):
        return cls(truncation, {(i, i): 1 for i in range(len(truncation))})


def _check_shared(f: AlgebraElement, g: AlgebraElement):
    if f.truncation is not g.truncation and f.truncation != g.truncation:
        raise TruncationMismatchError("elements live on different truncations")


def convolve(f: AlgebraElement, g: AlgebraElement) -> AlgebraElement:
    """Groupoid convolution: matrix product over the atom set."""
    _check_shared(f, g)
    rows: dict[int, list[tuple[int, Scalar]]] = {}
    for (u, w), val in g.entries.items():
        rows.setdefault(u, []).append((w, val))
    out: dict[tuple[int, int], Scalar] = {}
    for (v, u), fval in f.entries.items():
        for w, gval in rows.get(u, ()):
            key = (v, w)
            acc = out.get(key, 0) + fval * gval
            if acc == 0:
                out.pop(key, None)
            else:
                out[key] = acc
    return AlgebraElement(f.truncation, out)


def adjoint(f: AlgebraElement) -> AlgebraElement:
    """f*(v, w) = conjugate of f(w, v)."""
    out = {}
    for (v, w), val in f.entries.items():
        out[(w, v)] = val.conjugate() if isinstance(val, complex) else val
    return AlgebraElement(f.truncation, out)


def gauge_twist(f: AlgebraElement, q) -> AlgebraElement:
    """Analytic continuation of the gauge action to t = i*beta.

    Scales the entry at (v, w) by q^{c(v,w)}; exact for rational entries.
    """
    q = q.q if hasattr(q, "q") else Fraction(q)
    trunc = f.truncation
    out = {}
    for (v, w), val in f.entries.items():
        k = trunc.cocycle(v, w)
        out[(v, w)] = val * q**k
    return AlgebraElement(trunc, out)


def _measure_vector(measure: AtomicMeasure, trunc: GroupoidTruncation):
    weights = []
    for a in trunc.atoms:
        w = measure.weights.get(a.point.position)
        if w is None:
            raise TruncationMismatchError(
                f"measure carries no weight for atom {a.point}"
            )
        weights.append(w)
    return weights


def omega_state(measure: AtomicMeasure, f: AlgebraElement) -> Scalar:
    """State value: the diagonal restriction integrated against the measure.

    This is the composition of the conditional expectation onto functions
    on the unit space with integration, which is exactly how every KMS
    state of the gauge action factors.
    """
    trunc = f.truncation
    weights = _measure_vector(measure, trunc)
    total = Fraction(0)
    for (v, w), val in f.entries.items():
        if v == w:
            total += val * weights[v]
    return total


def kms_residual(
    f: AlgebraElement,
    g: AlgebraElement,
    q,
    measure: AtomicMeasure,
) -> Scalar:
    """omega(f * g) - omega(g * twist(f)); exactly zero for conformal weights."""
    q = q.q if hasattr(q, "q") else Fraction(q)
    if q != measure.q:
        raise TruncationMismatchError(
            f"measure built at q = {measure.q} but twist requested at q = {q}"
        )
    lhs = omega_state(measure, convolve(f, g))
    rhs = omega_state(measure, convolve(g, gauge_twist(f, q)))
    return lhs - rhs


@dataclass(frozen=True)
class Bisection:
    """A set of arrows with injective source and range families.

    Arrows are (range_index, cocycle, source_index): the arrow points from
    the source atom to the range atom, matching r(x,k,y) = x, s(x,k,y) = y.
    """

    truncation: GroupoidTruncation
    arrows: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        ranges = [r for r, _, _ in self.arrows]
        sources = [s for _, _, s in self.arrows]
        if len(set(ranges)) != len(ranges) or len(set(sources)) != len(sources):
            raise ValidationError("bisection needs injective range and source maps")
        for r, k, s in self.arrows:
            if k != self.truncation.cocycle(r, s):
                raise ValidationError("arrow cocycle does not match atom levels")


def sample_bisections(
    cmap: CircleMapPL,
    truncation: GroupoidTruncation,
    count: int,
    seed: int = 7,
    max_arrows: int = 6,
) -> tuple[list[Bisection], int]:
    """Seeded random bisections inside the truncation, plus a skip count.

    Two families are drawn: generic pair-groupoid bisections (random
    injective pairings) and graph-of-phi bisections pairing atoms with
    their images.  A requested graph arrow whose image atom is not in the
    truncation (the tree roots at level 0 map outside) is skipped and
    counted rather than padded.
    """
    rng = random.Random(seed)
    n = len(truncation)
    out = []
    skipped = 0
    while len(out) < count:
        if rng.random() < 0.5 or n < 2:
            # graph of phi over a random atom sample
            arrows = []
            size = rng.randrange(1, max_arrows + 1)
            tried = rng.sample(range(n), min(size, n))
            used_ranges = set()
            for s in tried:
                atom = truncation.atoms[s]
                if atom.tree_depth == 0:
                    skipped += 1  # image leaves the truncated support
                    continue
                image = cmap(atom.point)
                r = truncation.atom_index(image)
                if r in used_ranges:
                    continue
                used_ranges.add(r)
                arrows.append((r, truncation.cocycle(r, s), s))
            if not arrows:
                continue
            out.append(Bisection(truncation, tuple(arrows)))
        else:
            size = rng.randrange(1, max_arrows + 1)
            sources = rng.sample(range(n), min(size, n))
            ranges = rng.sample(range(n), len(sources))
            arrows = tuple(
                (r, truncation.cocycle(r, s), s) for r, s in zip(ranges, sources)
            )
            out.append(Bisection(truncation, arrows))
    return out, skipped


def random_rational_element(
    truncation: GroupoidTruncation,
    rng: random.Random,
    pool: Optional[list[int]] = None,
    n_entries: int = 12,
) -> AlgebraElement:
    """Random sparse kernel with small rational entries.

    Drawing indices from a shared pool keeps products of independently
    sampled elements nonzero, so identity checks are exercised rather than
    passed vacuously on empty convolutions.
    """
    n = len(truncation)
    if pool is None:
        pool = list(range(n))
    el = AlgebraElement(truncation)
    for _ in range(n_entries):
        v = pool[rng.randrange(len(pool))]
        w = pool[rng.randrange(len(pool))]
        el.set(v, w, Fraction(rng.randrange(-9, 10), rng.randrange(1, 10)))
    return el


def conformal_residual(measure: AtomicMeasure, w: Bisection, q=None) -> Fraction:
    """mu(s(W)) - sum over r(W) of q^{-c} mu({x}); exactly zero when conformal."""
    q = measure.q if q is None else (q.q if hasattr(q, "q") else Fraction(q))
    if q != measure.q:
        raise TruncationMismatchError(
            f"measure built at q = {measure.q}, check requested at q = {q}"
        )
    trunc = w.truncation
    weights = _measure_vector(measure, trunc)
    source_mass = sum((weights[s] for _, _, s in w.arrows), Fraction(0))
    range_mass = sum(
        (q ** (-k) * weights[r] for r, k, _ in w.arrows), Fraction(0)
    )
    return source_mass - range_mass
