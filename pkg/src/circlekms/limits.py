"""Resource guards for the exact orbit and branch machinery.

Everything in the library is exact rational arithmetic, so runaway inputs
show up as denominator blowup or branch explosion rather than loss of
precision.  The guards below fail loudly (ResourceLimitError) instead of
degrading silently.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Limits:
    # Maximal iterate depth accepted by branch/orbit operations.
    max_depth: int = 256
    # Cap on the number of monotone branches of an iterate.
    max_branches: int = 2_000_000
    # Orbit points abort once a coordinate denominator exceeds this many bits.
    max_denominator_bits: int = 1 << 16
    # Cap on arcs tracked by the exactness probe.
    max_arcs: int = 65_536


DEFAULT_LIMITS = Limits()
