"""Inclusive integer intervals and axis-aligned boxes over ordinal domains."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import InputError


@dataclass(frozen=True, order=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi or self.lo < 0:
            raise InputError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> int:
        return self.hi - self.lo + 1

    @property
    def dims(self) -> int:
        return 1

    @property
    def axes(self) -> tuple[Interval, ...]:
        return (self,)

    @property
    def cells(self) -> int:
        return self.length

    def contains(self, other: Interval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def overlaps(self, other: Interval) -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def overlap_length(self, other: Interval) -> int:
        return max(0, min(self.hi, other.hi) - max(self.lo, other.lo) + 1)

    def split(self, parts: int) -> list[Interval]:
        """Equal-width sub-intervals, left to right."""
        if self.length % parts:
            raise InputError(f"cannot split length {self.length} into {parts} parts")
        w = self.length // parts
        return [Interval(self.lo + k * w, self.lo + (k + 1) * w - 1) for k in range(parts)]

    def to_list(self) -> list[int]:
        return [self.lo, self.hi]

    def __str__(self):
        return f"[{self.lo},{self.hi}]"


@dataclass(frozen=True, order=True)
class Box:
    """Cartesian product of one interval per attribute; ``Box(x, y)`` in 2-d."""

    axes: tuple[Interval, ...]

    def __init__(self, *axes: Interval):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            raise InputError("a box needs at least one axis")
        object.__setattr__(self, "axes", tuple(axes))

    @classmethod
    def full(cls, side: int, dims: int) -> Box:
        return cls(*[Interval(0, side - 1)] * dims)

    @property
    def x(self) -> Interval:
        return self.axes[0]

    @property
    def y(self) -> Interval:
        return self.axes[1]

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def cells(self) -> int:
        n = 1
        for a in self.axes:
            n *= a.length
        return n

    def contains(self, other: Box) -> bool:
        return all(a.contains(b) for a, b in zip(self.axes, other.axes))

    def overlaps(self, other: Box) -> bool:
        return all(a.overlaps(b) for a, b in zip(self.axes, other.axes))

    def split(self, parts_per_axis: int) -> list[Box]:
        """Sub-boxes in row-major order: the first axis varies fastest."""
        pieces = [a.split(parts_per_axis) for a in self.axes]
        return [Box(*reversed(combo)) for combo in itertools.product(*reversed(pieces))]

    def to_list(self) -> list[list[int]]:
        return [a.to_list() for a in self.axes]

    def __str__(self):
        return "x".join(str(a) for a in self.axes)


Region = Interval | Box


def region_from_list(data) -> Region:
    if data and isinstance(data[0], (list, tuple)):
        return Box(*[Interval(*a) for a in data])
    return Interval(*data)
