"""Built-in example maps.

`five_hump` is the parametric family with uniform slope alpha, zero at
0, 1/4, 1/2, 2/3, 5/6 (and 1) and increasing on [0, 1/8]: two tall humps of
height alpha/8 followed by three short humps of height alpha/12.  It needs
alpha > 12 so that the short peaks clear height 1.  `tent` and `doubling`
are the standard controls (doubling exercises the locally-injective
rejection path).
"""

from fractions import Fraction

from .circlemap import CircleMapPL
from .errors import ValidationError

__all__ = ["tent", "doubling", "five_hump", "builtin_map", "BUILTIN_NAMES"]


def tent(assume_exact: bool = False) -> CircleMapPL:
    return CircleMapPL([0, Fraction(1, 2), 1], [0, 1, 0], assume_exact=assume_exact)


def doubling(assume_exact: bool = False) -> CircleMapPL:
    return CircleMapPL([0, 1], [0, 2], assume_exact=assume_exact)


def five_hump(alpha, assume_exact: bool = False) -> CircleMapPL:
    alpha = Fraction(alpha)
    if alpha <= 12:
        raise ValidationError(f"five_hump needs alpha > 12, got {alpha}")
    tall = alpha / 8
    short = alpha / 12
    breakpoints = [
        Fraction(0),
        Fraction(1, 8),
        Fraction(1, 4),
        Fraction(3, 8),
        Fraction(1, 2),
        Fraction(7, 12),
        Fraction(2, 3),
        Fraction(3, 4),
        Fraction(5, 6),
        Fraction(11, 12),
        Fraction(1),
    ]
    values = [0, tall, 0, tall, 0, short, 0, short, 0, short, 0]
    return CircleMapPL(breakpoints, values, assume_exact=assume_exact)


BUILTIN_NAMES = ("tent", "doubling", "example5")


def builtin_map(name: str, alpha=None, assume_exact: bool = False) -> CircleMapPL:
    """Resolve a CLI builtin name; example5 takes the slope parameter."""
    if name == "tent":
        return tent(assume_exact)
    if name == "doubling":
        return doubling(assume_exact)
    if name == "example5":
        if alpha is None:
            alpha = Fraction(121, 10)
        return five_hump(alpha, assume_exact)
    raise ValidationError(f"unknown builtin {name!r} (choose from {BUILTIN_NAMES})")
