from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from fractions import Fraction


def _is_power_of_two(q: Fraction) -> bool:
    num, den = q.numerator, q.denominator
    return num > 0 and (num & (num - 1)) == 0 and (den & (den - 1)) == 0 and (num == 1 or den == 1)


@dataclass(frozen=True)
class SolveParams:
    """Knobs for the LP-rounding pipeline.

    Defaults are desk-scale.  ``SolveParams.paper()`` gives the constants of
    the asymptotic analysis, which only bite on astronomically large inputs.
    """

    # size classes with sigma <= sigma_small are "small" (grouped with
    # delta = sqrt(sigma), then glued); the rest are grouped with delta_large
    sigma_small: Fraction = Fraction(1, 16)
    delta_large: Fraction = Fraction(32)
    # K scales the interval thresholds; large K keeps the walk budget below
    # N/16 once the support is a few dozen columns
    budget_K: float = 2.0**16
    # the loop runs while |frac| >= L log2(1/s_min); the budget itself is
    # checked before every walk, so a small L only costs rejected attempts
    support_L: float = 1.0
    frac_stop_c: float = 1.0

    # partial-coloring walk
    gamma: float = 0.05
    delta_freeze: float = 1e-4
    c_T: float = 64.0
    retries: int = 20
    snap_tol: float = 1e-6
    slack: float = 1e-6

    rng_seed: int = 0

    def __post_init__(self):
        if not _is_power_of_two(Fraction(self.sigma_small)) or self.sigma_small > Fraction(1, 16):
            raise ValueError("sigma_small must be a power of two no larger than 1/16 (gluing needs k >= 2)")
        for name in ("delta_large", "budget_K", "support_L", "frac_stop_c", "gamma",
                     "delta_freeze", "c_T", "snap_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.slack < 0 or self.retries < 0:
            raise ValueError("slack and retries must be non-negative")

    @classmethod
    def paper(cls, **overrides) -> "SolveParams":
        base = cls(sigma_small=Fraction(1, 2**72), delta_large=Fraction(64))
        return replace(base, **overrides)

    def with_(self, **overrides) -> "SolveParams":
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["sigma_small"] = str(self.sigma_small)
        d["delta_large"] = str(self.delta_large)
        return d
