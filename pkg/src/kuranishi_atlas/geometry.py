"""
Explicit chart domains.

A Domain is a finite union of axis-aligned rational boxes. Every axis interval is
either open (lo < hi) or a single point (lo == hi); point axes describe slices such
as s^{-1}(E_I) inside a chart. Periodic axes model S^1 = R/Z: an arc is stored with
lo in [0, 1) and hi <= lo + 1, so an arc of length exactly one is the circle with the
point lo removed, and ``full`` marks the whole circle.

All set operations are exact. Containment is decided on the cell decomposition
spanned by the endpoints of both operands, so every cell lies either wholly inside
or wholly outside each box and one representative per cell settles it.
"""
import bisect
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from kuranishi_atlas.errors import DimensionError

Number = Union[Fraction, float]
ONE = Fraction(1)
HALF = Fraction(1, 2)
SHIFTS = (-1, 0, 1)


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(2**40)
    return Fraction(value)


def exact_sqrt(value: Fraction) -> Number:
    """Square root that stays rational whenever numerator and denominator are perfect squares."""
    if value < 0:
        raise ValueError("square root of a negative number")
    num, den = value.numerator, value.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return math.sqrt(value)


@dataclass(frozen=True, order=True)
class Interval:
    """
    One axis of a box: open (lo, hi), a point [lo, lo], or the full circle.

    Use :meth:`make` rather than the constructor so periodic arcs are normalized.
    """
    lo: Fraction
    hi: Fraction
    full: bool = False

    @staticmethod
    def make(lo, hi, periodic: bool = False) -> Optional["Interval"]:
        """
        Build a normalized interval, or None when (lo, hi) is empty.

        :param lo: lower end (exact rational).
        :param hi: upper end; equal to lo for a point.
        :param periodic: whether the axis is R/Z.
        :return: the interval or None.
        """
        lo, hi = as_fraction(lo), as_fraction(hi)
        if lo > hi:
            return None
        if not periodic:
            return Interval(lo, hi)
        if hi - lo > 1:
            return Interval.circle()
        shift = math.floor(lo)
        return Interval(lo - shift, hi - shift)

    @staticmethod
    def point(value, periodic: bool = False) -> "Interval":
        return Interval.make(value, value, periodic)

    @staticmethod
    def circle() -> "Interval":
        return Interval(Fraction(0), ONE, True)

    @property
    def is_point(self) -> bool:
        return not self.full and self.lo == self.hi

    @property
    def length(self) -> Fraction:
        return ONE if self.full else self.hi - self.lo

    def midpoint(self) -> Fraction:
        return HALF if self.full else (self.lo + self.hi) / 2

    def contains(self, x, periodic: bool = False, closed: bool = False) -> bool:
        x = as_fraction(x)
        if self.full:
            return True
        if self.is_point:
            return (x - self.lo) % 1 == 0 if periodic else x == self.lo
        candidates = (x % 1, x % 1 + 1) if periodic else (x,)
        if closed:
            return any(self.lo <= c <= self.hi for c in candidates)
        return any(self.lo < c < self.hi for c in candidates)

    def meet(self, other: "Interval", periodic: bool = False) -> List["Interval"]:
        """Intersection; on a periodic axis two arcs may meet in two pieces."""
        if self.full:
            return [other]
        if other.full:
            return [self]
        if self.is_point:
            return [self] if other.contains(self.lo, periodic) else []
        if other.is_point:
            return [other] if self.contains(other.lo, periodic) else []
        pieces = []
        for s in (SHIFTS if periodic else (0,)):
            piece = Interval.make(max(self.lo, other.lo + s), min(self.hi, other.hi + s), periodic)
            if piece is not None and not piece.is_point and piece not in pieces:
                pieces.append(piece)
        return pieces

    def within(self, other: "Interval", periodic: bool = False) -> bool:
        if other.full:
            return True
        if self.full:
            return False
        if self.is_point:
            return other.contains(self.lo, periodic)
        if other.is_point:
            return False
        return any(other.lo + s <= self.lo and self.hi <= other.hi + s for s in (SHIFTS if periodic else (0,)))

    def minus_closure(self, other: "Interval", periodic: bool = False) -> List["Interval"]:
        """The part of this interval outside the closure of ``other``."""
        if not periodic:
            if self.is_point:
                return [] if other.lo <= self.lo <= other.hi else [self]
            pieces = [Interval.make(self.lo, min(self.hi, other.lo)), Interval.make(max(self.lo, other.hi), self.hi)]
            return [p for p in pieces if p is not None and not p.is_point]
        if other.full or other.length == 1:
            return []
        complement = Interval(other.hi, other.lo + 1) if not other.is_point else Interval(other.lo, other.lo + 1)
        return self.meet(Interval.make(complement.lo, complement.hi, True), True)

    def gap_to(self, x, periodic: bool = False) -> Fraction:
        """Distance from x to the closed interval."""
        x = as_fraction(x)
        if not periodic:
            return max(self.lo - x, Fraction(0), x - self.hi)
        if self.full or self.contains(x, True, closed=True):
            return Fraction(0)
        x = x % 1
        return min(abs(x - (end + s)) for end in (self.lo, self.hi) for s in SHIFTS)

    def gap(self, other: "Interval", periodic: bool = False) -> Fraction:
        """Distance between the closures of two intervals."""
        if not periodic:
            return max(self.lo - other.hi, other.lo - self.hi, Fraction(0))
        if self.full or other.full:
            return Fraction(0)
        return min(max(self.lo - (other.hi + s), (other.lo + s) - self.hi, Fraction(0)) for s in SHIFTS)

    def dilate(self, radius, periodic: bool = False) -> "Interval":
        if self.full:
            return self
        radius = as_fraction(radius)
        return Interval.make(self.lo - radius, self.hi + radius, periodic)

    def erode(self, radius, periodic: bool = False) -> Optional["Interval"]:
        if self.full or self.is_point:
            return self
        radius = as_fraction(radius)
        if self.lo + radius >= self.hi - radius:
            return None
        return Interval.make(self.lo + radius, self.hi - radius, periodic)

    def merge(self, other: "Interval", periodic: bool = False) -> Optional["Interval"]:
        """Union of two overlapping open intervals, or None when it is not a single interval."""
        if self.is_point or other.is_point:
            return None
        if self.full or other.full:
            return Interval.circle()
        for s in (SHIFTS if periodic else (0,)):
            lo, hi = other.lo + s, other.hi + s
            if max(self.lo, lo) < min(self.hi, hi):
                return Interval.make(min(self.lo, lo), max(self.hi, hi), periodic)
        return None

    def cells(self, breaks: Sequence[Fraction], periodic: bool = False, closed: bool = False) -> List[Fraction]:
        """
        Representatives of the cells of this interval cut at ``breaks``.

        :param breaks: sorted endpoints (reduced mod 1 on periodic axes).
        :param closed: include the endpoint cells of the closure.
        """
        if self.is_point:
            return [self.lo]
        if self.full:
            cuts = list(breaks)
            if not cuts:
                return [HALF]
            reps = list(cuts)
            for a, b in zip(cuts, cuts[1:] + [cuts[0] + 1]):
                reps.append(((a + b) / 2) % 1)
            return reps
        lifted = []
        for b in breaks:
            for s in ((0, 1, -1) if periodic else (0,)):
                if self.lo < b + s < self.hi:
                    lifted.append(b + s)
        cuts = sorted(set(lifted))
        ends = [self.lo] + cuts + [self.hi]
        reps = cuts + [(a + b) / 2 for a, b in zip(ends, ends[1:])]
        if closed:
            reps += [self.lo, self.hi]
        return [r % 1 for r in reps] if periodic else reps

    def __str__(self) -> str:
        if self.full:
            return "S1"
        if self.is_point:
            return f"{{{self.lo}}}"
        return f"({self.lo},{self.hi})"


@dataclass(frozen=True)
class Box:
    intervals: Tuple[Interval, ...]

    @property
    def dim(self) -> int:
        return len(self.intervals)

    def __getitem__(self, axis: int) -> Interval:
        return self.intervals[axis]

    def replace(self, axis: int, interval: Interval) -> "Box":
        items = list(self.intervals)
        items[axis] = interval
        return Box(tuple(items))

    def point_axes(self) -> Tuple[int, ...]:
        return tuple(k for k, iv in enumerate(self.intervals) if iv.is_point)

    def center(self) -> Tuple[Fraction, ...]:
        return tuple(iv.midpoint() for iv in self.intervals)

    def contains_point(self, x: Sequence, periodic: Sequence[bool], closed: bool = False) -> bool:
        return all(iv.contains(v, p, closed) for iv, v, p in zip(self.intervals, x, periodic))

    def meet(self, other: "Box", periodic: Sequence[bool]) -> List["Box"]:
        per_axis = [a.meet(b, p) for a, b, p in zip(self.intervals, other.intervals, periodic)]
        if any(not pieces for pieces in per_axis):
            return []
        return [Box(combo) for combo in itertools.product(*per_axis)]

    def within(self, other: "Box", periodic: Sequence[bool]) -> bool:
        return all(a.within(b, p) for a, b, p in zip(self.intervals, other.intervals, periodic))

    def minus_closure(self, other: "Box", periodic: Sequence[bool]) -> List["Box"]:
        if self.closed_gap_sq(other, periodic) > 0:
            return [self]
        pieces = []
        for k, p in enumerate(periodic):
            for piece in self.intervals[k].minus_closure(other.intervals[k], p):
                pieces.append(self.replace(k, piece))
        return pieces

    def gap_sq_to(self, x: Sequence, periodic: Sequence[bool]) -> Fraction:
        return sum((iv.gap_to(v, p) ** 2 for iv, v, p in zip(self.intervals, x, periodic)), Fraction(0))

    def closed_gap_sq(self, other: "Box", periodic: Sequence[bool]) -> Fraction:
        return sum((a.gap(b, p) ** 2 for a, b, p in zip(self.intervals, other.intervals, periodic)), Fraction(0))

    def closures_meet(self, other: "Box", periodic: Sequence[bool]) -> bool:
        return all(a.gap(b, p) == 0 for a, b, p in zip(self.intervals, other.intervals, periodic))

    def dilate(self, radii: Sequence, periodic: Sequence[bool]) -> "Box":
        return Box(tuple(iv.dilate(r, p) if r else iv for iv, r, p in zip(self.intervals, radii, periodic)))

    def __str__(self) -> str:
        return "x".join(str(iv) for iv in self.intervals)


def _axis_breaks(boxes: Iterable[Box], axis: int, periodic: bool) -> List[Fraction]:
    values = set()
    for box in boxes:
        iv = box.intervals[axis]
        if iv.full:
            continue
        for v in (iv.lo, iv.hi):
            values.add(v % 1 if periodic else v)
    return sorted(values)


def _staircase(dim: int, steps: int) -> List[Tuple[int, ...]]:
    """Maximal non-negative integer vectors i with |i|^2 < steps^2."""
    inside = [i for i in itertools.product(range(steps), repeat=dim) if sum(v * v for v in i) < steps * steps]
    maximal = []
    for i in inside:
        dominated = any(j != i and all(a <= b for a, b in zip(i, j)) for j in inside)
        if not dominated:
            maximal.append(i)
    return maximal


@dataclass(frozen=True)
class Domain:
    """
    Finite union of boxes in R^n with per-axis periodicity.

    ``tolerance`` is the declared over-approximation of a derived domain
    (zero for exact results); it does not take part in equality.
    """
    dim: int
    boxes: Tuple[Box, ...]
    periodic: Tuple[bool, ...]
    tolerance: Fraction = field(default=Fraction(0), compare=False)

    def __post_init__(self):
        if len(self.periodic) != self.dim:
            raise DimensionError(f"periodic flags {len(self.periodic)} do not match dimension {self.dim}")
        for box in self.boxes:
            if box.dim != self.dim:
                raise DimensionError(f"box of dimension {box.dim} in a domain of dimension {self.dim}")

    # construction

    @staticmethod
    def empty(dim: int, periodic: Optional[Sequence[bool]] = None) -> "Domain":
        return Domain(dim, (), tuple(periodic) if periodic is not None else (False,) * dim)

    @staticmethod
    def from_bounds(bounds: Sequence, periodic: Optional[Sequence[bool]] = None) -> "Domain":
        """
        Single-box domain from ``[(lo, hi), ...]``; a bare number stands for a point axis
        and ``None`` for the full circle on a periodic axis.
        """
        periodic = tuple(periodic) if periodic is not None else (False,) * len(bounds)
        intervals = []
        for bound, p in zip(bounds, periodic):
            if bound is None:
                intervals.append(Interval.circle())
            elif isinstance(bound, (tuple, list)):
                iv = Interval.make(bound[0], bound[1], p)
                if iv is None:
                    return Domain.empty(len(bounds), periodic)
                intervals.append(iv)
            else:
                intervals.append(Interval.point(bound, p))
        return Domain(len(bounds), (Box(tuple(intervals)),), periodic)

    @staticmethod
    def union_of(domains: Sequence["Domain"]) -> "Domain":
        if not domains:
            raise ValueError("union of no domains")
        result = domains[0]
        for d in domains[1:]:
            result = result.union(d)
        return result

    def with_boxes(self, boxes: Iterable[Box], tolerance: Optional[Fraction] = None) -> "Domain":
        return Domain(self.dim, normalize_boxes(list(boxes), self.periodic), self.periodic,
                      self.tolerance if tolerance is None else tolerance)

    # predicates

    def is_empty(self) -> bool:
        return not self.boxes

    def _check(self, other: "Domain") -> None:
        if self.dim != other.dim or self.periodic != other.periodic:
            raise DimensionError(f"incompatible domains: dim {self.dim} vs {other.dim}")

    def contains_point(self, x: Sequence, closed: bool = False) -> bool:
        return any(box.contains_point(x, self.periodic, closed) for box in self.boxes)

    def contains_points(self, points: np.ndarray, slack: float = 1e-12) -> np.ndarray:
        """Vectorized float membership; point axes match within ``slack``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(len(points), dtype=bool)
        for box in self.boxes:
            inside = np.ones(len(points), dtype=bool)
            for k, (iv, p) in enumerate(zip(box.intervals, self.periodic)):
                col = points[:, k]
                if iv.full:
                    continue
                lo, hi = float(iv.lo), float(iv.hi)
                if iv.is_point:
                    dist = np.abs(col - lo)
                    if p:
                        dist = np.minimum(dist % 1.0, 1.0 - dist % 1.0)
                    inside &= dist <= slack
                elif p:
                    c = np.mod(col, 1.0)
                    inside &= ((lo < c) & (c < hi)) | ((lo < c + 1.0) & (c + 1.0 < hi))
                else:
                    inside &= (lo < col) & (col < hi)
            mask |= inside
        return mask

    def _cells_inside(self, box: Box, other: "Domain", closed: bool) -> bool:
        relevant = [b for b in self.boxes if box.closures_meet(b, self.periodic)]
        if not relevant:
            return False
        axes = []
        for k, p in enumerate(self.periodic):
            breaks = _axis_breaks(relevant + [box], k, p)
            axes.append(box.intervals[k].cells(breaks, p, closed))
        for rep in itertools.product(*axes):
            if not any(b.contains_point(rep, self.periodic) for b in relevant):
                return False
        return True

    def contains(self, other: "Domain") -> bool:
        """Whether ``other`` is a subset of this domain (exact)."""
        self._check(other)
        return all(self._cells_inside(box, other, False) for box in other.boxes)

    def find_outside(self, other: "Domain") -> Optional[Tuple[Fraction, ...]]:
        """A point of ``other`` outside this domain, or None."""
        self._check(other)
        for box in other.boxes:
            relevant = [b for b in self.boxes if box.closures_meet(b, self.periodic)]
            axes = []
            for k, p in enumerate(self.periodic):
                axes.append(box.intervals[k].cells(_axis_breaks(relevant + [box], k, p), p))
            for rep in itertools.product(*axes):
                if not any(b.contains_point(rep, self.periodic) for b in relevant):
                    return rep
        return None

    def same_set(self, other: "Domain") -> bool:
        return self.contains(other) and other.contains(self)

    def closure_within(self, outer: "Domain") -> bool:
        """Whether the closure of this domain is a subset of ``outer`` (exact)."""
        self._check(outer)
        return all(outer._cells_inside(box, self, True) for box in self.boxes)

    def closures_meet(self, other: "Domain") -> bool:
        self._check(other)
        return any(a.closures_meet(b, self.periodic) for a in self.boxes for b in other.boxes)

    # set operations

    def union(self, other: "Domain") -> "Domain":
        self._check(other)
        return self.with_boxes(self.boxes + other.boxes, max(self.tolerance, other.tolerance))

    def intersection(self, other: "Domain") -> "Domain":
        self._check(other)
        boxes = [piece for a in self.boxes for b in other.boxes for piece in a.meet(b, self.periodic)]
        return self.with_boxes(boxes, max(self.tolerance, other.tolerance))

    def difference(self, other: "Domain") -> "Domain":
        """This domain minus the closure of ``other``; the result stays open in each slice."""
        self._check(other)
        current = list(self.boxes)
        for b in other.boxes:
            nxt = []
            for a in current:
                nxt.extend(a.minus_closure(b, self.periodic))
            current = normalize_boxes(nxt, self.periodic)
        return self.with_boxes(current)

    def slice(self, assignments: Dict[int, Fraction]) -> "Domain":
        """Intersection with the affine slice {x_a = c_a}."""
        boxes = []
        for box in self.boxes:
            cut = box
            for axis, value in assignments.items():
                point = Interval.point(value, self.periodic[axis])
                if not box.intervals[axis].contains(value, self.periodic[axis]):
                    cut = None
                    break
                cut = cut.replace(axis, point)
            if cut is not None:
                boxes.append(cut)
        return self.with_boxes(boxes)

    def shrink(self, eps) -> "Domain":
        """Erode every box by eps on its open axes; boxes that vanish are dropped."""
        boxes = []
        for box in self.boxes:
            eroded = [iv.erode(eps, p) for iv, p in zip(box.intervals, self.periodic)]
            if all(iv is not None for iv in eroded):
                boxes.append(Box(tuple(eroded)))
        return self.with_boxes(boxes)

    def dilate_axes(self, radii: Sequence) -> "Domain":
        return self.with_boxes(box.dilate(radii, self.periodic) for box in self.boxes)

    def epsilon_neighbourhood(self, eps, metric: str = "euclidean") -> "Domain":
        """
        Open eps-neighbourhood in the periodic Euclidean metric, or in the sup metric
        with ``metric="sup"``.

        Sup-metric neighbourhoods are exact box dilations. Euclidean ones are exact in
        one dimension; in higher dimensions each box is dilated by a staircase of radius
        vectors covering the ball, with the overshoot declared as tolerance.
        """
        eps = as_fraction(eps)
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self.is_empty():
            return self
        if metric == "sup":
            return self.dilate_axes([eps] * self.dim)
        if metric != "euclidean":
            raise ValueError(f"unknown metric {metric!r}")
        steps = 1 if self.dim == 1 else 4
        boxes = []
        for box in self.boxes:
            for vec in _staircase(self.dim, steps):
                boxes.append(box.dilate([eps * (v + 1) / steps for v in vec], self.periodic))
        overshoot = Fraction(0) if steps == 1 else eps * Fraction(math.ceil(math.sqrt(self.dim) * 10**6), 10**6) / steps
        return self.with_boxes(boxes, self.tolerance + overshoot)

    def bounding_box(self) -> Box:
        if self.is_empty():
            raise ValueError("empty domain has no bounding box")
        intervals = []
        for k, p in enumerate(self.periodic):
            axis = [box.intervals[k] for box in self.boxes]
            if p and (any(iv.full for iv in axis) or len(axis) > 1):
                intervals.append(Interval.circle())
                continue
            intervals.append(Interval(min(iv.lo for iv in axis), max(iv.hi for iv in axis)))
        return Box(tuple(intervals))

    # metric

    def distance(self, x: Sequence) -> Number:
        """Periodic Euclidean distance from a point to this domain; inf when empty."""
        if len(x) != self.dim:
            raise DimensionError(f"point of dimension {len(x)} for a domain of dimension {self.dim}")
        if self.is_empty():
            return math.inf
        point = [as_fraction(v) for v in x]
        return exact_sqrt(min(box.gap_sq_to(point, self.periodic) for box in self.boxes))

    def distance_to(self, other: "Domain") -> Number:
        """Distance between the closures of two domains; inf when either is empty."""
        self._check(other)
        if self.is_empty() or other.is_empty():
            return math.inf
        return exact_sqrt(min(a.closed_gap_sq(b, self.periodic) for a in self.boxes for b in other.boxes))

    def sup_distance_to(self, other: "Domain") -> Number:
        """Sup-metric distance between the closures of two domains; inf when either is empty."""
        self._check(other)
        if self.is_empty() or other.is_empty():
            return math.inf
        return min(max((a.intervals[k].gap(b.intervals[k], p) for k, p in enumerate(self.periodic)), default=Fraction(0))
                   for a in self.boxes for b in other.boxes)

    def clearance(self, inner: "Domain") -> Number:
        """
        Largest r with the open r-neighbourhood of ``inner`` inside this domain.

        Uses cube dilation along the open axes of each box of ``inner``, so the value
        is a lower bound for Euclidean balls. 0 when ``inner`` is not a subset.
        """
        self._check(inner)
        if inner.is_empty():
            return math.inf
        best: Number = math.inf
        for box in inner.boxes:
            axes = [k for k, iv in enumerate(box.intervals) if not iv.full]
            radius = cylinder_radius(box, axes, self)
            if radius is not None:
                best = min(best, radius)
        return best

    def sample(self, resolution) -> "SampleCloud":
        return SampleCloud(self, resolution)

    def __str__(self) -> str:
        if self.is_empty():
            return "empty"
        return " u ".join(str(box) for box in self.boxes)


def normalize_boxes(boxes: List[Box], periodic: Sequence[bool]) -> Tuple[Box, ...]:
    """Drop boxes contained in another box and merge boxes that overlap along a single axis."""
    boxes = list(dict.fromkeys(boxes))
    merged = True
    while merged:
        merged = False
        kept: List[Box] = []
        for box in sorted(boxes, key=lambda b: tuple((iv.lo, iv.hi) for iv in b.intervals)):
            if any(box.within(other, periodic) for other in kept):
                continue
            kept = [other for other in kept if not other.within(box, periodic)]
            kept.append(box)
        for i, j in itertools.combinations(range(len(kept)), 2):
            a, b = kept[i], kept[j]
            differing = [k for k in range(a.dim) if a.intervals[k] != b.intervals[k]]
            if len(differing) != 1:
                continue
            k = differing[0]
            joined = a.intervals[k].merge(b.intervals[k], periodic[k])
            if joined is not None:
                kept = [box for n, box in enumerate(kept) if n not in (i, j)] + [a.replace(k, joined)]
                merged = True
                break
        boxes = kept
    return tuple(boxes)


def cylinder_radius(box: Box, axes: Sequence[int], outer: Domain, closed: bool = False) -> Optional[Fraction]:
    """
    Radius for dilating ``box`` along ``axes`` inside ``outer``.

    With ``closed=False`` this is the largest r such that the open dilation stays in
    ``outer``. With ``closed=True`` it is the first r at which the closed dilation
    leaves ``outer``. Returns None when no endpoint of ``outer`` constrains the axes,
    and 0 when the box itself is not inside ``outer``.

    :param box: the box being dilated.
    :param axes: the axes along which it grows.
    :param outer: the domain to stay inside.
    :param closed: test closures instead of open boxes.
    """
    single = Domain(outer.dim, (box,), outer.periodic)
    if not outer.contains(single):
        return Fraction(0)
    candidates = set()
    for a in axes:
        iv = box.intervals[a]
        shifts = SHIFTS if outer.periodic[a] else (0,)
        for other in outer.boxes:
            o = other.intervals[a]
            if o.full:
                continue
            for e in (o.lo, o.hi):
                for s in shifts:
                    for r in (iv.lo - (e + s), (e + s) - iv.hi):
                        if r > 0:
                            candidates.add(r)
    if not candidates:
        return None
    ordered = sorted(candidates)

    def fits(r: Fraction) -> bool:
        grown = Domain(outer.dim, (box.dilate([r if k in axes else 0 for k in range(box.dim)], outer.periodic),),
                       outer.periodic)
        return grown.closure_within(outer) if closed else outer.contains(grown)

    if closed:
        lo, hi = 0, len(ordered) - 1
        if fits(ordered[hi]):
            return None
        while lo < hi:
            mid = (lo + hi) // 2
            if fits(ordered[mid]):
                lo = mid + 1
            else:
                hi = mid
        return ordered[lo]
    lo, hi = -1, len(ordered) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fits(ordered[mid]):
            lo = mid
        else:
            hi = mid - 1
    return ordered[lo] if lo >= 0 else Fraction(0)


class SampleCloud:
    """
    Deterministic lattice sample of a domain.

    Samples sit at the cell centers (k + 1/2) g of the lattice with spacing
    g = 1/ceil(1/h), plus end midpoints where a box edge is more than g/2 from the
    nearest lattice point. Every domain point lies within g/2 of a sample in each
    coordinate. Periodic coordinates are stored in [0, 1).
    """

    def __init__(self, domain: Domain, resolution) -> None:
        resolution = as_fraction(resolution)
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.domain = domain
        self.resolution = resolution
        self.spacing = Fraction(1, math.ceil(1 / resolution))
        self._blocks: List[Tuple[int, List[List[Fraction]]]] = []
        chunks = []
        start = 0
        for box in domain.boxes:
            axes = [self._axis_values(iv, p) for iv, p in zip(box.intervals, domain.periodic)]
            self._blocks.append((start, axes))
            grids = np.meshgrid(*[np.array([float(v) for v in vals]) for vals in axes], indexing="ij")
            block = np.stack([g.reshape(-1) for g in grids], axis=1) if grids else np.zeros((1, 0))
            chunks.append(block)
            start += len(block)
        raw = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, domain.dim))
        if len(raw):
            _, first = np.unique(np.round(raw, 12), axis=0, return_index=True)
            self._source = np.sort(first)
        else:
            self._source = np.zeros(0, dtype=int)
        self.points = raw[self._source] if len(raw) else raw
        self._starts = [b[0] for b in self._blocks]
        self._tree = None
        self._ghost_index = None

    def _axis_values(self, iv: Interval, periodic: bool) -> List[Fraction]:
        g = self.spacing
        if iv.is_point:
            return [iv.lo % 1 if periodic else iv.lo]
        lo, hi = (Fraction(0), ONE) if iv.full else (iv.lo, iv.hi)
        first = math.ceil(lo / g - HALF)
        values = []
        k = first
        while (k + HALF) * g < hi:
            v = (k + HALF) * g
            if v > lo:
                values.append(v)
            k += 1
        if not values:
            values = [(lo + hi) / 2]
        else:
            if values[0] - lo > g / 2 and not iv.full:
                values.insert(0, (lo + values[0]) / 2)
            if hi - values[-1] > g / 2 and not iv.full:
                values.append((values[-1] + hi) / 2)
        return [v % 1 for v in values] if periodic else values

    def __len__(self) -> int:
        return len(self.points)

    def exact(self, index: int) -> Tuple[Fraction, ...]:
        """Exact rational coordinates of sample ``index``."""
        raw = int(self._source[index])
        block = bisect.bisect_right(self._starts, raw) - 1
        start, axes = self._blocks[block]
        shape = [len(vals) for vals in axes]
        local = np.unravel_index(raw - start, shape) if shape else ()
        return tuple(vals[int(i)] for vals, i in zip(axes, local))

    def _ensure_tree(self) -> None:
        if self._tree is not None:
            return
        periodic_axes = [k for k, p in enumerate(self.domain.periodic) if p]
        copies, owners = [self.points], [np.arange(len(self.points))]
        for shift in itertools.product(SHIFTS, repeat=len(periodic_axes)):
            if not any(shift):
                continue
            moved = self.points.copy()
            for axis, s in zip(periodic_axes, shift):
                moved[:, axis] += s
            copies.append(moved)
            owners.append(np.arange(len(self.points)))
        data = np.concatenate(copies, axis=0)
        self._ghost_index = np.concatenate(owners)
        self._tree = cKDTree(data if len(data) else np.zeros((1, self.domain.dim)))

    def snap(self, points: np.ndarray, radius: float) -> np.ndarray:
        """
        Index of the nearest sample in the L-infinity metric within ``radius``, or -1.

        :param points: (k, dim) float array.
        :param radius: snapping radius.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(self.points) == 0 or len(points) == 0:
            return np.full(len(points), -1, dtype=int)
        self._ensure_tree()
        query = points.copy()
        for k, p in enumerate(self.domain.periodic):
            if p:
                query[:, k] = np.mod(query[:, k], 1.0)
        dist, idx = self._tree.query(query, k=1, p=np.inf, distance_upper_bound=radius)
        result = np.full(len(points), -1, dtype=int)
        hit = np.isfinite(dist)
        result[hit] = self._ghost_index[idx[hit]]
        return result

    def neighbour_pairs(self, radius: float) -> np.ndarray:
        """Pairs of samples within ``radius`` (Euclidean), periodic axes wrapped."""
        if len(self.points) < 2:
            return np.zeros((0, 2), dtype=int)
        self._ensure_tree()
        pairs = self._tree.query_pairs(radius, output_type="ndarray")
        if len(pairs) == 0:
            return np.zeros((0, 2), dtype=int)
        mapped = self._ghost_index[pairs]
        mapped = mapped[mapped[:, 0] != mapped[:, 1]]
        mapped = np.sort(mapped, axis=1)
        return np.unique(mapped, axis=0) if len(mapped) else np.zeros((0, 2), dtype=int)


@dataclass
class MetricSample:
    """
    Shortest-path metric on the classes of a sampled realization.

    ``graph`` is a sparse weighted adjacency matrix on class ids; distances are
    computed lazily with Dijkstra and cached per source class.
    """
    base: "object"
    classes: np.ndarray
    graph: "object"
    ratio_bounds: Tuple[float, float] = (1.0, 1.0)
    isometry_defect: float = 0.0
    _cache: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def class_distances(self, source: int) -> np.ndarray:
        if source not in self._cache:
            self._cache[source] = dijkstra(self.graph, directed=False, indices=source)
        return self._cache[source]

    def distance(self, a: int, b: int) -> float:
        """Distance between the classes of object samples ``a`` and ``b``."""
        ca, cb = int(self.classes[a]), int(self.classes[b])
        if ca == cb:
            return 0.0
        return float(self.class_distances(ca)[cb])

    def matrix(self, objects: Sequence[int]) -> np.ndarray:
        size = len(objects)
        result = np.zeros((size, size))
        for i, a in enumerate(objects):
            row = self.class_distances(int(self.classes[a]))
            for j, b in enumerate(objects):
                result[i, j] = 0.0 if self.classes[a] == self.classes[b] else row[int(self.classes[b])]
        return result


def log_domain(label: str, domain: Domain) -> None:
    logging.debug(f"{label}: {domain}")
