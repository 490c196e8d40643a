"""Bin packing instances: exact rational sizes with integer multiplicities.

Sizes are stored as :class:`fractions.Fraction`, sorted strictly decreasing,
with duplicates merged into the multiplicity vector.  Nothing in here ever
touches a float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np


class InstanceError(ValueError):
    pass


class ParseError(InstanceError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Instance:
    sizes: tuple[Fraction, ...]
    mult: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.sizes) != len(self.mult):
            raise InstanceError("sizes and multiplicities differ in length")
        for i, (s, m) in enumerate(zip(self.sizes, self.mult)):
            if not isinstance(s, Fraction):
                raise InstanceError(f"size {i} is not a Fraction")
            if not 0 < s <= 1:
                raise InstanceError(f"size {s} outside (0, 1]")
            if int(m) != m or m < 1:
                raise InstanceError(f"multiplicity {m} of size {s} is not a positive integer")
            if i and not s < self.sizes[i - 1]:
                raise InstanceError("sizes must be strictly decreasing")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[object, int]], name: str = "") -> "Instance":
        """Build an instance from (size, count) pairs, merging equal sizes.

        Sizes may be anything :class:`Fraction` accepts (ints, strings like
        ``"0.3"`` or ``"3/10"``, Fractions).  Floats are rejected because
        their binary expansion is never what the caller meant.
        """
        merged: dict[Fraction, int] = {}
        for size, count in pairs:
            if isinstance(size, float):
                raise InstanceError("float sizes are not accepted; pass a string or Fraction")
            s = Fraction(size)
            if not 0 < s <= 1:
                raise InstanceError(f"size {s} outside (0, 1]")
            if int(count) != count or count < 1:
                raise InstanceError(f"multiplicity {count} is not a positive integer")
            merged[s] = merged.get(s, 0) + int(count)
        order = sorted(merged, reverse=True)
        return cls(tuple(order), tuple(merged[s] for s in order), name)

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def total_items(self) -> int:
        return sum(self.mult)

    @property
    def s_min(self) -> Fraction | None:
        return self.sizes[-1] if self.sizes else None

    def denominator(self) -> int:
        """Common denominator D of all sizes (1 for the empty instance)."""
        return common_denominator(self.sizes)

    def expanded(self) -> list[int]:
        """Type index of every item, largest first."""
        return [i for i, m in enumerate(self.mult) for _ in range(m)]

    def with_mult(self, mult: Sequence[int], name: str | None = None) -> "Instance":
        """Same sizes, new multiplicities; types with zero count are dropped."""
        pairs = [(s, m) for s, m in zip(self.sizes, mult) if m > 0]
        return Instance.from_pairs(pairs, self.name if name is None else name)


def common_denominator(sizes: Iterable[Fraction]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), (s.denominator for s in sizes), 1)


def total_size(instance: Instance) -> Fraction:
    return sum((s * m for s, m in zip(instance.sizes, instance.mult)), Fraction(0))


def parse_instance(text: str, name: str = "") -> Instance:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(lineno, f"expected '<size> <multiplicity>', got {raw.strip()!r}")
        try:
            size = Fraction(fields[0])
        except (ValueError, ZeroDivisionError):
            raise ParseError(lineno, f"bad size {fields[0]!r}") from None
        try:
            count = int(fields[1])
        except ValueError:
            raise ParseError(lineno, f"bad multiplicity {fields[1]!r}") from None
        if not 0 < size <= 1:
            raise ParseError(lineno, f"size {fields[0]} outside (0, 1]")
        if count < 1:
            raise ParseError(lineno, f"multiplicity {count} < 1")
        pairs.append((size, count))
    return Instance.from_pairs(pairs, name)


def serialize_instance(instance: Instance) -> str:
    lines = []
    if instance.name:
        lines.append(f"# {instance.name}")
    lines += [f"{s} {m}" for s, m in zip(instance.sizes, instance.mult)]
    return "\n".join(lines) + "\n"


def read_instance(path) -> Instance:
    from pathlib import Path

    p = Path(path)
    return parse_instance(p.read_text(encoding="utf-8"), name=p.stem)


def write_instance(instance: Instance, path) -> None:
    from pathlib import Path

    Path(path).write_text(serialize_instance(instance), encoding="utf-8")


GENERATORS = ("uniform", "three_partition", "discrete")


def generate(kind: str, n: int, seed: int, *, lattice: int = 10000, k: int = 5,
             name: str | None = None) -> Instance:
    """Random instance with ``n`` items whose sizes lie on the lattice ``1/lattice``.

    uniform          sizes j/D with j uniform on 1..D
    three_partition  sizes strictly between 1/4 and 1/2
    discrete         ``k`` distinct lattice sizes, items drawn among them
    """
    if kind not in GENERATORS:
        raise InstanceError(f"unknown generator {kind!r}; expected one of {GENERATORS}")
    if n < 1:
        raise InstanceError("n must be at least 1")
    D = int(lattice)
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        nums = rng.integers(1, D + 1, size=n)
    elif kind == "three_partition":
        # smallest j with 4j > D, largest j with 2j < D
        lo, hi = D // 4 + 1, (D - 1) // 2
        if lo > hi:
            raise InstanceError(f"lattice {D} has no points in (1/4, 1/2)")
        nums = rng.integers(lo, hi + 1, size=n)
    else:
        support = rng.choice(np.arange(1, D + 1), size=min(k, D), replace=False)
        nums = rng.choice(support, size=n)
    pairs = [(Fraction(int(j), D), 1) for j in nums]
    return Instance.from_pairs(pairs, name or f"{kind}-n{n}-s{seed}")
