"""KMS and ground-state classification report.

Assembles the catalog, entropy and simplicity data into the statement the
theory makes for an exact, not locally injective map: no KMS states below
the entropy, a unique non-atomic one at it, N extremal purely atomic ones
above it (N = number of restricted-orbit classes of non-pre-periodic
critical points), ground states parametrized by the states of a direct
sum of matrix algebras sized by the final-point classes, and 0-KMS states
exactly in the non-simple degree +-1 case.  Factor-type strings are
emitted as labels, not recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .circlemap import CircleMapPL, CirclePoint, exactness_probe, fixed_points, preimage_points
from .entropy import EntropyResult, best_entropy
from .errors import LocallyInjectiveError, ValidationError
from .limits import DEFAULT_LIMITS, Limits
from .orbits import CriticalCatalog, critical_catalog

__all__ = ["KmsReport", "classify", "simplicity_check", "ground_state_algebra"]

REGIMES = {
    "below": "none",
    "at_h": "unique, non-atomic",
    "above": "N extremal, purely atomic",
}

FACTOR_LABELS = {
    "above_h": "type I_∞",
    "at_h": "type III_{e^{-h}}",
}


@dataclass(frozen=True)
class SimplicityResult:
    verdict: str  # "simple" | "non-simple" | "undetermined"
    witness: Optional[CirclePoint] = None

    def to_json(self):
        if self.verdict == "non-simple":
            return {"verdict": self.verdict, "witness": str(self.witness)}
        return {"verdict": self.verdict, "witness": None}


def simplicity_check(
    cmap: CircleMapPL,
    depth: int = 16,
    exactness_known: bool = True,
    limits: Limits = DEFAULT_LIMITS,
) -> SimplicityResult:
    """Simplicity of the groupoid algebra under the exactness hypothesis.

    Degree outside {1, -1} forces simplicity; otherwise non-simplicity
    needs a non-critical fixed point whose other preimages are all
    critical, which is decided exactly.
    """
    if not exactness_known:
        return SimplicityResult("undetermined")
    if cmap.degree not in (1, -1):
        return SimplicityResult("simple")
    critical_positions = {pt.position for pt, _ in cmap.turning_points()}
    for pt, is_critical in fixed_points(cmap):
        if is_critical:
            continue
        others = {
            p.position for p in preimage_points(cmap, pt) if p.position != pt.position
        }
        if others and others <= critical_positions:
            return SimplicityResult("non-simple", witness=pt)
    return SimplicityResult("simple")


def ground_state_algebra(
    cmap: CircleMapPL, depth: int, limits: Limits = DEFAULT_LIMITS
) -> list[int]:
    """Matrix-block sizes of the ground-state algebra: the final-point
    class sizes, sorted; empty when no ground states exist."""
    try:
        catalog = critical_catalog(cmap, depth, limits)
    except LocallyInjectiveError:
        return []
    return catalog.ground_state_dims()


@dataclass(frozen=True)
class KmsReport:
    cmap: CircleMapPL
    entropy: EntropyResult
    catalog: CriticalCatalog
    n_classes: int
    ground_state_dims: list[int]
    simplicity: SimplicityResult
    zero_kms: str
    exactness_status: str  # "confirmed" | "assumed"
    certificates_depth: int
    assume_exact_echo: bool

    @property
    def regimes(self):
        return dict(REGIMES)

    @property
    def factor_labels(self):
        labels = dict(FACTOR_LABELS)
        if self.entropy.exact_base is not None:
            labels["lambda"] = 1 / Fraction(self.entropy.exact_base)
        else:
            labels["lambda"] = None
        return labels

    def summary(self) -> str:
        h = self.entropy.exact_form or f"~{self.entropy.decimal:.6g}"
        parts = [
            f"no KMS states for 0 != beta < h; unique KMS state at beta = h = {h}"
        ]
        if self.n_classes:
            parts.append(
                f"{self.n_classes} extremal purely atomic KMS states for each "
                f"beta > h"
            )
            dims = " + ".join(f"M_{d}" for d in self.ground_state_dims)
            parts.append(f"ground states = states of {dims}")
        else:
            parts.append(
                "no KMS states above h and no ground states "
                "(every critical point is pre-periodic at this depth)"
            )
        if self.zero_kms != "none":
            parts.append("0-KMS states: all Borel probability measures")
        return "; ".join(parts)


def classify(
    cmap: CircleMapPL,
    depth: int = 50,
    limits: Limits = DEFAULT_LIMITS,
    probe_depth: int = 1,
    probe_horizon: int = 8,
) -> KmsReport:
    """Full classification; depth certifies every orbit statement.

    Locally injective maps are rejected (the algebraic case has its own
    known answer, carried in the error).  Exactness must be confirmed by
    the bounded probe or assumed by the input flag.
    """
    if cmap.is_locally_injective:
        raise LocallyInjectiveError(cmap.degree)
    probe = exactness_probe(cmap, probe_depth, probe_horizon, limits)
    if probe == "confirmed":
        exactness = "confirmed"
    elif cmap.assume_exact:
        exactness = "assumed"
    else:
        raise ValidationError(
            "exactness not established: probe inconclusive at depth "
            f"{probe_depth}/horizon {probe_horizon} and assume-exact not set"
        )
    catalog = critical_catalog(cmap, depth, limits)
    entropy = best_entropy(cmap, limits=limits)
    simplicity = simplicity_check(cmap, depth, exactness_known=True, limits=limits)
    zero = (
        "all-Borel-probability-measures"
        if simplicity.verdict == "non-simple"
        else "none"
    )
    return KmsReport(
        cmap=cmap,
        entropy=entropy,
        catalog=catalog,
        n_classes=catalog.n_classes,
        ground_state_dims=catalog.ground_state_dims(),
        simplicity=simplicity,
        zero_kms=zero,
        exactness_status=exactness,
        certificates_depth=depth,
        assume_exact_echo=cmap.assume_exact,
    )
