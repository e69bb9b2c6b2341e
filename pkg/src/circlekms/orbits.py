"""Restricted-orbit machinery over critical points.

Pre-periodicity, valency-matched orbit relations (witnesses), the critical
catalog (pre-periodic / terminal / final classification and the partition
into restricted-orbit classes) and enumeration of restricted-orbit atoms
with integer levels.  Every certificate is relative to an explicit search
depth: with rational data standing in for non-algebraic parameters,
"not pre-periodic" and "final" are only refutable, never provable, so the
depth travels with every result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .circlemap import (
    CircleMapPL,
    CirclePoint,
    IDENTITY_VALENCY,
    Valency,
    compose_valencies,
    preimage_points,
)
from .errors import LocallyInjectiveError, ResourceLimitError, ValidationError
from .limits import DEFAULT_LIMITS, Limits

__all__ = [
    "PreperiodicityCertificate",
    "ROWitness",
    "CriticalClass",
    "CriticalCatalog",
    "OrbitAtom",
    "orbit_with_valencies",
    "preperiodicity",
    "ro_witness",
    "critical_catalog",
    "enumerate_orbit_atoms",
]


def orbit_with_valencies(
    cmap: CircleMapPL, x: CirclePoint, depth: int, limits: Limits = DEFAULT_LIMITS
) -> tuple[list[CirclePoint], list[Valency]]:
    """Forward orbit x, phi(x), ..., phi^depth(x) with val(phi^i, x) each.

    Valencies accumulate through one-sided sign composition, so the whole
    orbit costs one map evaluation per step.  Aborts on denominator blowup.
    """
    if depth > limits.max_depth:
        raise ResourceLimitError("max_depth", limits.max_depth)
    pts = [x]
    vals = [IDENTITY_VALENCY]
    pt = x
    acc = IDENTITY_VALENCY
    for _ in range(depth):
        acc = compose_valencies(acc, cmap.val1(pt))
        pt = cmap(pt)
        if pt.position.denominator.bit_length() > limits.max_denominator_bits:
            raise ResourceLimitError(
                "max_denominator_bits",
                limits.max_denominator_bits,
                "orbit denominator growth",
            )
        pts.append(pt)
        vals.append(acc)
    return pts, vals


@dataclass(frozen=True)
class PreperiodicityCertificate:
    """Either an exact repeat phi^i(x) = phi^j(x) (i < j) or its absence.

    `orbit_prefix` holds the computed orbit points; for a repeat it runs
    through index j, for a no-repeat certificate through `depth`.
    """

    x: CirclePoint
    depth: int
    i: Optional[int]
    j: Optional[int]
    orbit_prefix: tuple[CirclePoint, ...]

    @property
    def is_preperiodic(self) -> bool:
        return self.i is not None

    def describe(self) -> str:
        if self.is_preperiodic:
            return f"preperiodic(i={self.i}, j={self.j})"
        return f"no-repeat-up-to({self.depth})"


def preperiodicity(
    cmap: CircleMapPL, x: CirclePoint, depth: int, limits: Limits = DEFAULT_LIMITS
) -> PreperiodicityCertificate:
    """Walk the exact forward orbit and report the first repeat, if any."""
    pts, _ = orbit_with_valencies(cmap, x, depth, limits)
    seen: dict[Fraction, int] = {}
    for idx, pt in enumerate(pts):
        prev = seen.get(pt.position)
        if prev is not None:
            return PreperiodicityCertificate(
                x=x, depth=depth, i=prev, j=idx, orbit_prefix=tuple(pts[: idx + 1])
            )
        seen[pt.position] = idx
    return PreperiodicityCertificate(
        x=x, depth=depth, i=None, j=None, orbit_prefix=tuple(pts)
    )


@dataclass(frozen=True)
class ROWitness:
    """phi^n(x) = phi^m(y) with val(phi^n, x) = val(phi^m, y).

    Places x and y in the same restricted orbit with relation index
    k = n - m.  Tie-broken to the least (n+m, n) in searches.
    """

    n: int
    m: int
    common_point: CirclePoint
    valency: Valency

    @property
    def k(self) -> int:
        return self.n - self.m

    def reversed(self) -> "ROWitness":
        return ROWitness(self.m, self.n, self.common_point, self.valency)

    def compose(self, other: "ROWitness", cmap: CircleMapPL, x: CirclePoint):
        """Witness x ~ z from witnesses x ~ y (self) and y ~ z (other).

        Index arithmetic only: the combined pair is (n1+n2, m1+m2); its
        common point is recomputed from x for the record.
        """
        n, m = self.n + other.n, self.m + other.m
        pt = x
        for _ in range(n):
            pt = cmap(pt)
        from .circlemap import valency as val_fn

        return ROWitness(n, m, pt, val_fn(cmap, x, n))


def ro_witness(
    cmap: CircleMapPL,
    x: CirclePoint,
    y: CirclePoint,
    depth: int,
    limits: Limits = DEFAULT_LIMITS,
) -> Optional[ROWitness]:
    """Least-(n+m, n) valency-matched orbit collision, or None at depth."""
    pts_x, vals_x = orbit_with_valencies(cmap, x, depth, limits)
    pts_y, vals_y = orbit_with_valencies(cmap, y, depth, limits)
    for total in range(2 * depth + 1):
        for n in range(max(0, total - depth), min(depth, total) + 1):
            m = total - n
            if pts_x[n] == pts_y[m] and vals_x[n] == vals_y[m]:
                return ROWitness(n, m, pts_x[n], vals_x[n])
    return None


@dataclass
class CriticalClass:
    """One restricted-orbit class of non-pre-periodic critical points."""

    members: list[CirclePoint]
    terminal: list[CirclePoint]
    final: list[CirclePoint]
    base: CirclePoint
    # witness from `base` to each terminal member (base's own is (0,0))
    base_witnesses: dict[Fraction, ROWitness] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def final_size(self) -> int:
        return len(self.final)


@dataclass
class CriticalCatalog:
    """Depth-certified classification of the critical points."""

    all_critical: list[tuple[CirclePoint, Valency]]
    preperiodic: dict[Fraction, PreperiodicityCertificate]
    nonpreperiodic: list[CirclePoint]
    classes: list[CriticalClass]
    terminal: list[CirclePoint]
    final: list[CirclePoint]
    depth: int

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def ground_state_dims(self) -> list[int]:
        """Sizes of the final-point restrictions of the classes, sorted."""
        return sorted(cls.final_size for cls in self.classes if cls.final_size)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        self.parent[self.find(i)] = self.find(j)


def critical_catalog(
    cmap: CircleMapPL, depth: int, limits: Limits = DEFAULT_LIMITS
) -> CriticalCatalog:
    """Classify all critical points to the given search depth."""
    crits = cmap.turning_points()
    if not crits:
        raise LocallyInjectiveError(cmap.degree)
    crit_positions = {pt.position for pt, _ in crits}

    certs = {
        pt.position: preperiodicity(cmap, pt, depth, limits) for pt, _ in crits
    }
    prepd = {pos: c for pos, c in certs.items() if c.is_preperiodic}
    nonpre = [pt for pt, _ in crits if pt.position not in prepd]

    # pairwise direct witnesses + transitive closure
    witnesses: dict[tuple[Fraction, Fraction], ROWitness] = {}
    uf = _UnionFind(len(nonpre))
    for i in range(len(nonpre)):
        for j in range(i + 1, len(nonpre)):
            w = ro_witness(cmap, nonpre[i], nonpre[j], depth, limits)
            if w is not None:
                witnesses[(nonpre[i].position, nonpre[j].position)] = w
                witnesses[(nonpre[j].position, nonpre[i].position)] = w.reversed()
                uf.union(i, j)

    # terminality: forward orbit (k >= 1) avoids the critical set
    orbits = {
        pt.position: orbit_with_valencies(cmap, pt, depth, limits)[0]
        for pt in nonpre
    }
    terminal = [
        pt
        for pt in nonpre
        if all(q.position not in crit_positions for q in orbits[pt.position][1:])
    ]
    terminal_set = {pt.position for pt in terminal}

    # finality: no valency-matched relation phi^n(c) = phi^m(c') with m < n
    final = []
    for c in terminal:
        violated = False
        for cp in terminal:
            w = _violating_witness(cmap, c, cp, depth, limits)
            if w is not None:
                violated = True
                break
        if not violated:
            final.append(c)
    final_set = {pt.position for pt in final}

    groups: dict[int, list[CirclePoint]] = {}
    for idx, pt in enumerate(nonpre):
        groups.setdefault(uf.find(idx), []).append(pt)
    classes = []
    for members in groups.values():
        members = sorted(members, key=lambda p: p.position)
        cls_final = [p for p in members if p.position in final_set]
        cls_terminal = [p for p in members if p.position in terminal_set]
        base = (cls_final or cls_terminal or members)[0]
        base_w = _witnesses_from_base(cmap, base, cls_terminal, witnesses, depth, limits)
        classes.append(
            CriticalClass(
                members=members,
                terminal=cls_terminal,
                final=cls_final,
                base=base,
                base_witnesses=base_w,
            )
        )
    classes.sort(key=lambda c: c.base.position)

    return CriticalCatalog(
        all_critical=crits,
        preperiodic=prepd,
        nonpreperiodic=nonpre,
        classes=classes,
        terminal=terminal,
        final=final,
        depth=depth,
    )


def _violating_witness(cmap, c, cp, depth, limits):
    """A relation phi^n(c) = phi^m(cp), valency-matched, with m < n."""
    pts_c, vals_c = orbit_with_valencies(cmap, c, depth, limits)
    pts_p, vals_p = orbit_with_valencies(cmap, cp, depth, limits)
    for n in range(1, depth + 1):
        for m in range(0, n):
            if pts_c[n] == pts_p[m] and vals_c[n] == vals_p[m]:
                return ROWitness(n, m, pts_c[n], vals_c[n])
    return None


def _witnesses_from_base(cmap, base, terminals, witnesses, depth, limits):
    """Base-to-terminal witnesses, composing through the witness graph
    when a direct collision was not found at this depth."""
    out: dict[Fraction, ROWitness] = {}
    self_w = ROWitness(0, 0, base, IDENTITY_VALENCY)
    out[base.position] = self_w
    pending = [t for t in terminals if t.position != base.position]
    for t in pending:
        direct = witnesses.get((base.position, t.position))
        if direct is not None:
            out[t.position] = direct
    missing = [t for t in pending if t.position not in out]
    if missing:
        # breadth-first composition through available direct witnesses
        frontier = dict(out)
        changed = True
        while changed and any(t.position not in out for t in missing):
            changed = False
            for (a, b), w_ab in list(witnesses.items()):
                if a in frontier and b not in out:
                    # witness base->a  composed with  a->b
                    w = frontier[a].compose(w_ab, cmap, base)
                    out[b] = w
                    frontier[b] = w
                    changed = True
        still = [t for t in missing if t.position not in out]
        if still:
            raise ValidationError(
                f"no witness chain from class base {base} to {still[0]} "
                f"at depth {depth}"
            )
    return out


@dataclass(frozen=True)
class OrbitAtom:
    """A restricted-orbit point with its integer level over the class base.

    (point, level, base) is an arrow of the oriented groupoid; the level is
    well defined because non-pre-periodic orbits have trivial isotropy.
    `via_terminal` records the terminal point and tree depth it came from.
    """

    point: CirclePoint
    level: int
    via_terminal: CirclePoint
    tree_depth: int


def enumerate_orbit_atoms(
    cmap: CircleMapPL,
    cls: CriticalClass,
    depth: int,
    limits: Limits = DEFAULT_LIMITS,
) -> list[OrbitAtom]:
    """All preimages phi^-k(c') of the class's terminal points, k <= depth.

    The level of v in phi^-k(c') is k + (m - n) for the stored base
    witness (n, m); backward trees of distinct terminal points are disjoint
    (a shared point would put a critical point in a terminal forward
    orbit), which is asserted.
    """
    if depth > limits.max_depth:
        raise ResourceLimitError("max_depth", limits.max_depth)
    if not cls.terminal:
        raise ValidationError("class has no terminal members at this depth")
    atoms: list[OrbitAtom] = []
    seen: dict[Fraction, tuple[Fraction, int]] = {}
    for cp in cls.terminal:
        w = cls.base_witnesses[cp.position]
        shift = w.m - w.n
        layer = [cp]
        for k in range(depth + 1):
            for pt in layer:
                prev = seen.get(pt.position)
                if prev is not None:
                    raise ValidationError(
                        f"atom {pt} reached from two terminal points "
                        f"({prev[0]} and {cp.position}); terminal certificate "
                        "is inconsistent"
                    )
                seen[pt.position] = (cp.position, k)
                atoms.append(
                    OrbitAtom(
                        point=pt, level=k + shift, via_terminal=cp, tree_depth=k
                    )
                )
            if k < depth:
                nxt = set()
                for pt in layer:
                    nxt.update(preimage_points(cmap, pt))
                layer = sorted(nxt)
                if any(
                    p.position.denominator.bit_length()
                    > limits.max_denominator_bits
                    for p in layer
                ):
                    raise ResourceLimitError(
                        "max_denominator_bits", limits.max_denominator_bits
                    )
    atoms.sort(key=lambda a: (a.level, a.point.position))
    return atoms
