"""Distributions appearing in sampling assignments.

Synthesis and checking only ever consume two facts about a distribution:
its exact mean and an interval containing its support. Sampling (for the
simulator) additionally needs a draw procedure; built-in kinds carry one,
`custom` kinds look theirs up in a registry by sampler id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

from .rationals import rat, RationalLike


class DistKind(enum.Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"
    BERNOULLI = "bernoulli"
    DISCRETE = "discrete"
    CUSTOM = "custom"


# Custom samplers: id -> rng-consuming draw function returning float.
_SAMPLERS: Dict[str, Callable] = {}


def register_sampler(name: str, fn: Callable) -> None:
    _SAMPLERS[name] = fn


@dataclass(frozen=True)
class DistributionSpec:
    """A named distribution with exact mean and support interval.

    `support_lo`/`support_hi` of None mean unbounded on that side. The
    declared mean must be the analytic mean for built-in kinds and must
    lie inside the support.
    """

    kind: DistKind
    mean: Fraction
    support_lo: Optional[Fraction]
    support_hi: Optional[Fraction]
    params: Tuple[Tuple[str, object], ...] = field(default=())

    def __post_init__(self):
        if self.support_lo is not None and self.mean < self.support_lo:
            raise ValueError("mean below support")
        if self.support_hi is not None and self.mean > self.support_hi:
            raise ValueError("mean above support")
        if (self.support_lo is not None and self.support_hi is not None
                and self.support_lo > self.support_hi):
            raise ValueError("empty support interval")

    @property
    def bounded(self) -> bool:
        return self.support_lo is not None and self.support_hi is not None

    def param(self, name: str):
        for k, v in self.params:
            if k == name:
                return v
        raise KeyError(name)

    # -- constructors -------------------------------------------------

    @staticmethod
    def normal(mean: RationalLike, stddev: RationalLike) -> "DistributionSpec":
        mean, stddev = rat(mean), rat(stddev)
        if stddev <= 0:
            raise ValueError("stddev must be positive")
        return DistributionSpec(DistKind.NORMAL, mean, None, None,
                                (("mean", mean), ("stddev", stddev)))

    @staticmethod
    def uniform(lo: RationalLike, hi: RationalLike) -> "DistributionSpec":
        lo, hi = rat(lo), rat(hi)
        if lo > hi:
            raise ValueError("uniform needs lo <= hi")
        return DistributionSpec(DistKind.UNIFORM, (lo + hi) / 2, lo, hi,
                                (("lo", lo), ("hi", hi)))

    @staticmethod
    def bernoulli(p: RationalLike) -> "DistributionSpec":
        p = rat(p)
        if not 0 <= p <= 1:
            raise ValueError("bernoulli parameter outside [0,1]")
        return DistributionSpec(DistKind.BERNOULLI, p, Fraction(0), Fraction(1),
                                (("p", p),))

    @staticmethod
    def discrete(pairs: List[Tuple[RationalLike, RationalLike]]) -> "DistributionSpec":
        vals = [(rat(v), rat(p)) for v, p in pairs]
        if not vals:
            raise ValueError("discrete distribution needs at least one outcome")
        total = sum(p for _, p in vals)
        if total != 1:
            raise ValueError(f"discrete probabilities sum to {total}, not 1")
        if any(p < 0 for _, p in vals):
            raise ValueError("negative probability")
        mean = sum(v * p for v, p in vals)
        lo = min(v for v, _ in vals)
        hi = max(v for v, _ in vals)
        return DistributionSpec(DistKind.DISCRETE, mean, lo, hi,
                                (("values", tuple(vals)),))

    @staticmethod
    def custom(sampler: str, mean: RationalLike,
               support_lo: Optional[RationalLike],
               support_hi: Optional[RationalLike]) -> "DistributionSpec":
        lo = rat(support_lo) if support_lo is not None else None
        hi = rat(support_hi) if support_hi is not None else None
        return DistributionSpec(DistKind.CUSTOM, rat(mean), lo, hi,
                                (("sampler", sampler),))

    # -- sampling ------------------------------------------------------

    def sample(self, rng) -> Fraction:
        """Draw one value; floats are converted to exact rationals.

        `rng` is a numpy Generator; normals use its ziggurat method, which
        is the fixed, versioned algorithm the statistical tests assume.
        """
        if self.kind is DistKind.NORMAL:
            x = rng.normal(float(self.param("mean")), float(self.param("stddev")))
            return Fraction(float(x))
        if self.kind is DistKind.UNIFORM:
            lo, hi = self.param("lo"), self.param("hi")
            return lo + (hi - lo) * Fraction(float(rng.random()))
        if self.kind is DistKind.BERNOULLI:
            return Fraction(1 if Fraction(float(rng.random())) < self.param("p") else 0)
        if self.kind is DistKind.DISCRETE:
            u = Fraction(float(rng.random()))
            acc = Fraction(0)
            for v, p in self.param("values"):
                acc += p
                if u < acc:
                    return v
            return self.param("values")[-1][0]
        fn = _SAMPLERS.get(self.param("sampler"))
        if fn is None:
            raise KeyError(f"no registered sampler {self.param('sampler')!r}")
        return Fraction(float(fn(rng)))

    def pretty(self) -> str:
        if self.kind is DistKind.NORMAL:
            return f"norm({self.param('mean')}, {self.param('stddev')})"
        if self.kind is DistKind.UNIFORM:
            return f"unif({self.param('lo')}, {self.param('hi')})"
        if self.kind is DistKind.BERNOULLI:
            return f"bern({self.param('p')})"
        if self.kind is DistKind.DISCRETE:
            inner = ", ".join(f"{v}: {p}" for v, p in self.param("values"))
            return f"discrete({inner})"
        return f"custom({self.param('sampler')})"
