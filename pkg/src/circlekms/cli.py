"""Command-line surface.

Subcommands: analyze, classify, entropy, measure, verify, example.  All
reports are deterministic (seeded randomness, canonical serialization).
Exit codes: 0 success, 2 validation error (bad input, out-of-scope map,
divergent partition function), 3 resource guard.
"""

from __future__ import annotations

import argparse
import random
import sys
from fractions import Fraction

from .builtin_maps import BUILTIN_NAMES, builtin_map
from .circlemap import CircleMapPL, exactness_probe, format_map, parse_map
from .classifier import classify
from .errors import CircleKmsError, ResourceLimitError, ValidationError
from .groupoid import (
    AlgebraElement,
    GroupoidTruncation,
    adjoint,
    conformal_residual,
    kms_residual,
    omega_state,
    convolve,
    random_rational_element,
    sample_bisections,
)
from .limits import DEFAULT_LIMITS
from .measures import InverseTemperature, class_measure
from .orbits import critical_catalog
from .report import (
    atoms_csv,
    classification_report,
    emit_report,
    entropy_section_sources,
    map_echo,
    measure_report,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3

DEFAULT_SEED = 7


def _add_map_arguments(parser):
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", dest="map_path", help="path to a cmap v1 document")
    src.add_argument(
        "--builtin", choices=BUILTIN_NAMES, help="use a built-in example map"
    )
    parser.add_argument(
        "--alpha",
        default=None,
        help="slope parameter for --builtin example5 (rational, default 121/10)",
    )
    parser.add_argument(
        "--assume-exact",
        action="store_true",
        help="treat the map as topologically exact when the probe is inconclusive",
    )


def _load_map(args) -> CircleMapPL:
    if args.map_path:
        with open(args.map_path, "r", encoding="utf-8") as fh:
            cmap = parse_map(fh.read())
        if args.assume_exact and not cmap.assume_exact:
            cmap = CircleMapPL(cmap.breakpoints, cmap.values, assume_exact=True)
        return cmap
    alpha = Fraction(args.alpha) if args.alpha else None
    return builtin_map(args.builtin, alpha=alpha, assume_exact=args.assume_exact)


def _write(data: bytes, path):
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode())


def _cmd_classify(args, detail: bool) -> int:
    cmap = _load_map(args)
    report = classify(cmap, depth=args.depth)
    _write(emit_report(classification_report(report, detail=detail)), args.out)
    return EXIT_OK


def _cmd_entropy(args) -> int:
    cmap = _load_map(args)
    sections = entropy_section_sources(cmap, n_max=args.n_max)
    payload = {"map": map_echo(cmap), "entropy": sections}
    _write(emit_report(payload), args.out)
    return EXIT_OK


def _cmd_measure(args) -> int:
    cmap = _load_map(args)
    q = InverseTemperature.parse(args.q)
    catalog = critical_catalog(cmap, args.catalog_depth)
    if not (0 <= args.class_index < catalog.n_classes):
        raise ValidationError(
            f"class index {args.class_index} out of range "
            f"(catalog has {catalog.n_classes} classes)"
        )
    cls = catalog.classes[args.class_index]
    measure = class_measure(cmap, cls, q, args.depth)
    payload = {"map": map_echo(cmap), "measure": measure_report(measure, args.class_index)}
    _write(emit_report(payload), args.out)
    if args.csv:
        _write(emit_report(atoms_csv(measure), "csv"), args.csv)
    return EXIT_OK


def _cmd_verify(args) -> int:
    cmap = _load_map(args)
    q = InverseTemperature.parse(args.q)
    catalog = critical_catalog(cmap, args.catalog_depth)
    if catalog.n_classes == 0:
        raise ValidationError(
            "no restricted-orbit classes: every critical point is pre-periodic "
            f"at depth {args.catalog_depth}; nothing to verify"
        )
    rng = random.Random(args.seed)
    class_sections = []
    for index, cls in enumerate(catalog.classes):
        measure = class_measure(cmap, cls, q, args.truncation_depth)
        truncation = GroupoidTruncation(atoms=measure.atoms)
        n = len(truncation)
        kms_checks = min(50, args.samples)
        kms_zero = True
        nonvacuous = 0
        for _ in range(kms_checks):
            pool = rng.sample(range(n), min(8, n))
            f = random_rational_element(truncation, rng, pool)
            g = random_rational_element(truncation, rng, pool)
            if omega_state(measure, convolve(f, g)) != 0:
                nonvacuous += 1
            if kms_residual(f, g, q.q, measure) != 0:
                kms_zero = False
        bisections, skipped = sample_bisections(
            cmap, truncation, args.samples, seed=rng.randrange(1 << 30)
        )
        conf_zero = all(conformal_residual(measure, w) == 0 for w in bisections)
        # negative control: double one deep atom's weight and hit it directly
        target = next(i for i in range(n) if truncation.atoms[i].tree_depth >= 1)
        perturbed = measure.perturbed(truncation.atoms[target].point)
        other = (target + 1) % n
        f1 = AlgebraElement.arrow(truncation, target, other)
        control = kms_residual(f1, adjoint(f1), q.q, perturbed) != 0
        class_sections.append(
            {
                "class_index": index,
                "base": cls.base,
                "atoms": n,
                "kms_checks": kms_checks,
                "kms_nonvacuous": nonvacuous,
                "kms_all_exact_zero": kms_zero,
                "conformal_checks": len(bisections),
                "conformal_all_exact_zero": conf_zero,
                "skipped_pairs": skipped,
                "negative_control_nonzero": control,
            }
        )
    payload = {
        "map": map_echo(cmap),
        "q": q.q,
        "truncation_depth": args.truncation_depth,
        "catalog_depth": args.catalog_depth,
        "seed": args.seed,
        "classes": class_sections,
        "all_exact_zero": all(
            s["kms_all_exact_zero"] and s["conformal_all_exact_zero"]
            for s in class_sections
        ),
    }
    _write(emit_report(payload), args.out)
    return EXIT_OK


def _cmd_example(args) -> int:
    alpha = Fraction(args.alpha) if args.alpha else None
    cmap = builtin_map(args.name, alpha=alpha, assume_exact=False)
    _write(format_map(cmap).encode(), args.out)
    return EXIT_OK


def _cmd_probe(args) -> int:
    cmap = _load_map(args)
    verdict = exactness_probe(cmap, args.depth, args.horizon)
    payload = {
        "map": map_echo(cmap),
        "probe": {"depth": args.depth, "horizon": args.horizon, "verdict": verdict},
    }
    _write(emit_report(payload), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circlekms",
        description=(
            "Exact KMS-state and ground-state classification of piecewise-"
            "linear circle maps"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full classification report with catalog detail")
    _add_map_arguments(p)
    p.add_argument("--depth", type=int, default=50, help="certificate depth")
    p.add_argument("--out", default=None)
    p.set_defaults(func=lambda a: _cmd_classify(a, detail=True))

    p = sub.add_parser("classify", help="classification report (summary catalog)")
    _add_map_arguments(p)
    p.add_argument("--depth", type=int, default=50)
    p.add_argument("--out", default=None)
    p.set_defaults(func=lambda a: _cmd_classify(a, detail=False))

    p = sub.add_parser("entropy", help="entropy by every applicable method")
    _add_map_arguments(p)
    p.add_argument("--n-max", type=int, default=4, help="bracket depth")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("measure", help="truncated atomic conformal measure")
    _add_map_arguments(p)
    p.add_argument("--class", dest="class_index", type=int, required=True)
    p.add_argument("--q", required=True, help="e^{-beta} as a rational in (0,1)")
    p.add_argument("--depth", type=int, default=3, help="truncation depth K")
    p.add_argument("--catalog-depth", type=int, default=50)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None, help="write the atoms CSV here")
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("verify", help="exact KMS and conformality residual suite")
    _add_map_arguments(p)
    p.add_argument("--q", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--truncation-depth", type=int, default=3)
    p.add_argument("--catalog-depth", type=int, default=50)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("example", help="emit a built-in map spec document")
    p.add_argument("--name", required=True, choices=BUILTIN_NAMES)
    p.add_argument("--alpha", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_example)

    p = sub.add_parser("probe", help="bounded-depth exactness probe")
    _add_map_arguments(p)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_probe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (CircleKmsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
