"""Canonical report serialization.

JSON reports sort keys, encode rationals as {"num": str, "den": str} and
round floats to 12 significant digits, so identical requests produce
byte-identical artifacts.  The atoms CSV schema is fixed:
position_p,position_q,level,weight_num,weight_den,via_terminal.
"""

from __future__ import annotations

import io
import json
from fractions import Fraction

from .circlemap import CircleMapPL, CirclePoint
from .classifier import KmsReport
from .entropy import EntropyResult
from .measures import AtomicMeasure

ATOMS_CSV_HEADER = "position_p,position_q,level,weight_num,weight_den,via_terminal"


def canonical(obj):
    """Recursively rewrite a report tree into canonical JSON-ready form."""
    if isinstance(obj, Fraction):
        return {"num": str(obj.numerator), "den": str(obj.denominator)}
    if isinstance(obj, CirclePoint):
        return canonical(obj.position)
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, str):
        return obj
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    raise TypeError(f"cannot canonicalize {type(obj)!r}")


def emit_report(data, fmt: str = "json") -> bytes:
    """Serialize a report tree to deterministic bytes."""
    if fmt == "json":
        text = json.dumps(canonical(data), sort_keys=True, indent=2, ensure_ascii=True)
        return (text + "\n").encode()
    if fmt == "csv":
        return data.encode() if isinstance(data, str) else bytes(data)
    raise ValueError(f"unknown format {fmt!r}")


def map_echo(cmap: CircleMapPL) -> dict:
    return {
        "breakpoints": list(cmap.breakpoints),
        "values": list(cmap.values),
        "degree": cmap.degree,
        "assume_exact": cmap.assume_exact,
    }


def entropy_section(res: EntropyResult) -> dict:
    out = res.to_dict()
    if res.enclosure is not None:
        out["enclosure"] = {"lo": res.enclosure[0], "hi": res.enclosure[1]}
    return out


def entropy_section_sources(cmap: CircleMapPL, n_max: int = 4) -> dict:
    """Entropy by every applicable method, for the `entropy` subcommand."""
    from .entropy import entropy_bracket, entropy_uniform, markov_entropy

    uniform = entropy_uniform(cmap)
    markov = markov_entropy(cmap)
    bracket = entropy_bracket(cmap, n_max=n_max)
    out = {
        "uniform": entropy_section(uniform) if uniform else None,
        "markov": None,
        "bracket": entropy_section(bracket),
    }
    if markov is not None:
        result, data = markov
        out["markov"] = entropy_section(result)
        out["markov"]["partition"] = [
            {"start": a, "end": b} for a, b in data.partition
        ]
        out["markov"]["transition_matrix"] = [
            list(row) for row in data.transition_matrix
        ]
    best = uniform or (markov[0] if markov else None) or bracket
    out["best"] = entropy_section(best)
    return out


def catalog_section(report: KmsReport, detail: bool = False) -> dict:
    cat = report.catalog
    out = {
        "critical_count": len(cat.all_critical),
        "preperiodic_count": len(cat.preperiodic),
        "nonpreperiodic": [pt for pt in cat.nonpreperiodic],
        "terminal": [pt for pt in cat.terminal],
        "final": [pt for pt in cat.final],
        "classes": [
            {
                "members": cls.members,
                "final_members": cls.final,
                "base": cls.base,
                "size": cls.size,
            }
            for cls in cat.classes
        ],
        "depth": cat.depth,
    }
    if detail:
        out["critical_points"] = [
            {"point": pt, "valency": str(v)} for pt, v in cat.all_critical
        ]
        out["preperiodic_certificates"] = [
            {
                "point": cert.x,
                "certificate": cert.describe(),
                "orbit_prefix": list(cert.orbit_prefix),
            }
            for cert in cat.preperiodic.values()
        ]
        out["class_witnesses"] = [
            {
                "base": cls.base,
                "witnesses": [
                    {"to": Fraction(pos), "n": w.n, "m": w.m, "common": w.common_point}
                    for pos, w in sorted(cls.base_witnesses.items())
                ],
            }
            for cls in cat.classes
        ]
    return out


def classification_report(report: KmsReport, detail: bool = False) -> dict:
    return {
        "map": map_echo(report.cmap),
        "entropy": entropy_section(report.entropy),
        "catalog": catalog_section(report, detail),
        "N": report.n_classes,
        "regimes": report.regimes,
        "ground_state_dims": report.ground_state_dims,
        "simplicity": report.simplicity.to_json(),
        "zero_kms": report.zero_kms,
        "factor_labels": report.factor_labels,
        "certificates_depth": report.certificates_depth,
        "exactness": report.exactness_status,
        "assume_exact_echo": report.assume_exact_echo,
        "summary": report.summary(),
    }


def measure_report(measure: AtomicMeasure, class_index: int) -> dict:
    return {
        "class_index": class_index,
        "q": measure.q,
        "beta_decimal": -_logf(measure.q),
        "K": measure.K,
        "base": measure.base,
        "normalization": measure.normalization,
        "tail_bound": measure.tail_bound,
        "tail_certified": measure.tail_bound is not None,
        "atom_count": len(measure.atoms),
        "class_weights": [
            {
                "terminal": cw.terminal,
                "t_exponent": cw.t_exponent,
                "alpha_weight": cw.alpha_weight,
            }
            for cw in measure.class_weights
        ],
    }


def _logf(q: Fraction) -> float:
    import math

    return math.log(q.numerator) - math.log(q.denominator)


def atoms_csv(measure: AtomicMeasure) -> str:
    """Fixed-schema CSV of the truncated atoms, in canonical atom order."""
    buf = io.StringIO()
    buf.write(ATOMS_CSV_HEADER + "\n")
    for atom in measure.atoms:
        w = measure.weights[atom.point.position]
        pos = atom.point.position
        via = atom.via_terminal.position
        via_str = (
            str(via.numerator)
            if via.denominator == 1
            else f"{via.numerator}/{via.denominator}"
        )
        buf.write(
            f"{pos.numerator},{pos.denominator},{atom.level},"
            f"{w.numerator},{w.denominator},{via_str}\n"
        )
    return buf.getvalue()
