"""
Kuranishi charts and coordinate changes.

A chart is a domain U with an obstruction dimension, a section s: U -> E and a
footprint map psi that sends the zero set into the model coordinates of the
footprint space. A coordinate change is a union of pieces, each an embedding on a
box domain, together with the linear injection phihat between obstruction spaces.

Set-level operations (image, preimage, composition) are exact when every
embedding is axis-affine, i.e. each output coordinate is a * x_k + b. Periodic
source coordinates are lifted into the real range of the piece's own box before
the embedding is applied, which is how the inverse of x -> x mod 1 is written.
"""
import itertools
import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from kuranishi_atlas.config import MAP_TOLERANCE, default_resolution
from kuranishi_atlas.errors import (
    CompositionError,
    DimensionError,
    FootprintError,
    IndexConditionViolation,
    MapAxiomViolation,
    NonAffineError,
    ZeroSetError,
    format_label,
)
from kuranishi_atlas.expr import ZERO, Const, ExprMap, Var, add
from kuranishi_atlas.exterior import RationalMatrix
from kuranishi_atlas.geometry import HALF, SHIFTS, Box, Domain, Interval, as_fraction, cylinder_radius
from kuranishi_atlas.reports import CheckReport

Label = FrozenSet[int]
AxisMap = Tuple[Optional[int], Fraction, Fraction]


def label_of(indices) -> Label:
    return frozenset(int(i) for i in indices)


@dataclass(frozen=True)
class Chart:
    label: Label
    domain: Domain
    obs_dim: int
    section: ExprMap
    footprint_map: ExprMap
    footprint: Domain

    def __post_init__(self):
        if self.section.in_dim != self.domain.dim or self.section.out_dim != self.obs_dim:
            raise DimensionError(
                f"chart {format_label(self.label)}: section is R^{self.section.in_dim} -> R^{self.section.out_dim}, "
                f"expected R^{self.domain.dim} -> R^{self.obs_dim}")
        if self.footprint_map.in_dim != self.domain.dim or self.footprint_map.out_dim != self.footprint.dim:
            raise DimensionError(f"chart {format_label(self.label)}: footprint map has the wrong shape")

    @property
    def dim(self) -> int:
        return self.domain.dim - self.obs_dim

    def zero_set(self) -> Domain:
        return zero_locus(self.section, self.domain)

    def footprint_piece(self) -> "ChangePiece":
        return ChangePiece(self.domain, self.footprint_map)

    def footprint_preimage(self, region: Domain) -> Domain:
        """Points of U whose footprint coordinates lie in ``region``."""
        return self.footprint_piece().preimage(region)

    def footprint_points(self, points: np.ndarray) -> np.ndarray:
        values = self.footprint_map.evaluate_array(points)
        for k, p in enumerate(self.footprint.periodic):
            if p:
                values[:, k] = np.mod(values[:, k], 1.0)
        return values

    def restricted_to(self, domain: Domain, footprint: Optional[Domain] = None) -> "Chart":
        return replace(self, domain=domain, footprint=self.footprint if footprint is None else footprint)

    def __str__(self) -> str:
        return f"chart {format_label(self.label)} on {self.domain}, E = R^{self.obs_dim}, s = {self.section}"


@lru_cache(maxsize=512)
def zero_locus(section: ExprMap, domain: Domain) -> Domain:
    """
    Exact zero set of ``section`` inside ``domain``.

    The zero set must be a finite union of axis slices {x_a = c_a}; components that
    vanish identically are ignored.

    :raises ZeroSetError: when the zero set is not a union of rational axis slices.
    """
    if domain.is_empty():
        return domain
    expressions = [sympy.expand(c.to_sympy()) for c in section.components if c != ZERO]
    expressions = [e for e in expressions if e != 0]
    if not expressions:
        return domain
    if any(e.has(sympy.sin, sympy.cos, sympy.pi, sympy.Piecewise) for e in expressions):
        raise ZeroSetError(f"cannot solve the transcendental section {section} exactly")
    symbols = [sympy.Symbol(f"x{k + 1}") for k in range(section.in_dim)]
    try:
        solutions = sympy.solve(expressions, symbols, dict=True)
    except NotImplementedError as e:
        raise ZeroSetError(f"cannot solve {section} = 0") from e
    pieces = []
    for solution in solutions:
        assignment: Dict[int, Fraction] = {}
        complex_root = False
        for symbol, value in solution.items():
            if value.is_real is False:
                complex_root = True
                break
            if value.free_symbols:
                raise ZeroSetError(f"zero set of {section} is not a union of axis slices")
            if not value.is_rational:
                raise ZeroSetError(f"zero set of {section} has the irrational coordinate {value}")
            rational = sympy.Rational(value)
            assignment[symbols.index(symbol)] = Fraction(int(rational.p), int(rational.q))
        if not complex_root:
            pieces.append(domain.slice(assignment))
    if not pieces:
        return Domain.empty(domain.dim, domain.periodic)
    return Domain.union_of(pieces)


def _lift(iv: Interval, periodic: bool, within: Interval) -> Tuple[Fraction, Fraction]:
    """Real representative of an arc inside the real range of ``within``."""
    if not periodic or within.full:
        return iv.lo, iv.hi
    for s in SHIFTS + (2, -2):
        if within.lo <= iv.lo + s and iv.hi + s <= within.hi:
            return iv.lo + s, iv.hi + s
    return iv.lo, iv.hi


def _lift_value(x: Fraction, periodic: bool, within: Interval) -> Fraction:
    if not periodic or within.full:
        return x % 1 if periodic else x
    base = x % 1
    for s in (0, 1, -1, 2):
        if within.lo <= base + s <= within.hi:
            return base + s
    return base


def box_image(box: Box, piece_box: Box, maps: Sequence[AxisMap], source_periodic: Sequence[bool],
              target_periodic: Sequence[bool]) -> Box:
    """
    Exact image of ``box`` (a subset of ``piece_box``) under an axis-affine embedding.

    :raises NonAffineError: when an open source axis feeds more than one output, or a
        full circle is mapped by anything other than a rotation or reflection.
    """
    used = [k for k, _, _ in maps if k is not None and not box[k].is_point]
    if len(used) != len(set(used)):
        raise NonAffineError("an open source axis feeds several outputs; its image is not a box")
    intervals = []
    for (k, a, b), tp in zip(maps, target_periodic):
        if k is None or a == 0:
            intervals.append(Interval.point(b, tp))
            continue
        iv = box[k]
        if iv.full:
            if tp and abs(a) == 1:
                intervals.append(Interval.circle())
                continue
            raise NonAffineError("a full circle is only mapped exactly by x -> +-x + b")
        lo, hi = _lift(iv, source_periodic[k], piece_box[k])
        ends = sorted((a * lo + b, a * hi + b))
        intervals.append(Interval.make(ends[0], ends[1], tp))
    return Box(tuple(intervals))


def _axis_preimage(iv: Interval, sp: bool, range_iv: Interval, a: Fraction, b: Fraction, tp: bool,
                   target: Interval) -> List[Interval]:
    if target.full:
        return [iv]
    if iv.full:
        if not (tp and abs(a) == 1):
            raise NonAffineError("preimage of an arc under a non-rotation of the full circle")
        if target.is_point:
            return [Interval.point(a * (target.lo - b), True)]
        ends = sorted((a * (target.lo - b), a * (target.hi - b)))
        return [Interval.make(ends[0], ends[1], True)]
    lo, hi = _lift(iv, sp, range_iv)
    image = sorted((a * lo + b, a * hi + b))
    if tp:
        first = math.floor(image[0] - target.hi)
        last = math.ceil(image[1] - target.lo)
        windows = [(target.lo + n, target.hi + n) for n in range(first, last + 1)]
    else:
        windows = [(target.lo, target.hi)]
    pieces = []
    for tl, th in windows:
        xl, xh = sorted(((tl - b) / a, (th - b) / a))
        if iv.is_point:
            inside = (xl == lo) if tl == th else (xl < lo < xh)
            if inside and iv not in pieces:
                pieces.append(iv)
            continue
        if tl == th:
            if lo < xl < hi:
                pieces.append(Interval.point(xl, sp))
            continue
        piece = Interval.make(max(lo, xl), min(hi, xh), sp)
        if piece is not None and not piece.is_point:
            pieces.append(piece)
    return pieces


def box_preimage(piece_box: Box, maps: Sequence[AxisMap], source_periodic: Sequence[bool],
                 target_periodic: Sequence[bool], target_box: Box) -> List[Box]:
    """Exact preimage of ``target_box`` inside ``piece_box`` under an axis-affine embedding."""
    current = [piece_box]
    for (k, a, b), tp, t_iv in zip(maps, target_periodic, target_box.intervals):
        if k is None or a == 0:
            if not t_iv.contains(b, tp):
                return []
            continue
        refined = []
        for box in current:
            for piece in _axis_preimage(box[k], source_periodic[k], piece_box[k], a, b, tp, t_iv):
                refined.append(box.replace(k, piece))
        current = refined
        if not current:
            return []
    return current


def _in_range(value: Fraction, iv: Interval, periodic: bool, closed: bool) -> bool:
    if iv.full:
        return True
    if iv.is_point:
        return (value - iv.lo) % 1 == 0 if periodic else value == iv.lo
    return iv.lo <= value <= iv.hi if closed else iv.lo < value < iv.hi


def solve_affine(box: Box, maps: Sequence[AxisMap], source_periodic: Sequence[bool],
                 target_periodic: Sequence[bool], y: Sequence, closed: bool = False) -> Optional[Tuple[Fraction, ...]]:
    """
    The point x of ``box`` (of its closure with ``closed``) mapped to y, or None.

    Candidates are read off the outputs that see each source axis; periodic targets
    contribute one candidate per integer shift that lands in the box's real range.

    :raises NonAffineError: when an open axis of the box does not reach any output.
    """
    y = tuple(as_fraction(v) for v in y)
    options: Dict[int, List[Fraction]] = {}
    for (k, a, b), value, tp in zip(maps, y, target_periodic):
        if k is None or a == 0 or k in options:
            continue
        iv = box[k]
        if iv.is_point:
            options[k] = [iv.lo]
            continue
        lo, hi = (Fraction(0), Fraction(1)) if iv.full else (iv.lo, iv.hi)
        if tp:
            ends = sorted((a * lo + b, a * hi + b))
            shifts = range(math.floor(ends[0] - value) - 1, math.ceil(ends[1] - value) + 2)
            options[k] = [(value + n - b) / a for n in shifts]
        else:
            options[k] = [(value - b) / a]
    for k, iv in enumerate(box.intervals):
        if k not in options:
            if not iv.is_point:
                raise NonAffineError("embedding forgets an open axis; it is not injective")
            options[k] = [iv.lo]
    target = tuple(v % 1 if p else v for v, p in zip(y, target_periodic))
    for combo in itertools.product(*[options[k] for k in range(box.dim)]):
        if not all(_in_range(v, iv, p, closed) for v, iv, p in zip(combo, box.intervals, source_periodic)):
            continue
        values = tuple(b if k is None else a * combo[k] + b for k, a, b in maps)
        if tuple(v % 1 if p else v for v, p in zip(values, target_periodic)) == target:
            return tuple(v % 1 if p else v for v, p in zip(combo, source_periodic))
    return None


def evaluate_closed(box: Box, maps: Sequence[AxisMap], source_periodic: Sequence[bool], x: Sequence) -> Tuple:
    """Affine image of a point of the closure of ``box``, using the box's real range."""
    lifted = [_lift_value(as_fraction(v), p, iv) for v, p, iv in zip(x, source_periodic, box.intervals)]
    return tuple(b if k is None else a * lifted[k] + b for k, a, b in maps)


@dataclass(frozen=True)
class ChangePiece:
    domain: Domain
    embedding: ExprMap

    def maps(self) -> Optional[Tuple[AxisMap, ...]]:
        return _axis_maps(self.embedding)

    def locate(self, x: Sequence) -> Optional[Tuple[Box, Tuple[Fraction, ...]]]:
        """The box containing x and x lifted into the box's real range."""
        x = tuple(as_fraction(v) for v in x)
        for box in self.domain.boxes:
            if box.contains_point(x, self.domain.periodic):
                lifted = tuple(_lift_value(v, p, iv) for v, p, iv in zip(x, self.domain.periodic, box.intervals))
                return box, lifted
        return None

    def lift_array(self, box: Box, points: np.ndarray) -> np.ndarray:
        lifted = points.copy()
        for k, (iv, p) in enumerate(zip(box.intervals, self.domain.periodic)):
            if p and not iv.full:
                column = np.mod(lifted[:, k], 1.0)
                lifted[:, k] = np.where(column <= float(iv.lo), column + 1.0, column)
            elif p:
                lifted[:, k] = np.mod(lifted[:, k], 1.0)
        return lifted

    def image(self, region: Domain, target_periodic: Sequence[bool]) -> List[Box]:
        maps = self.maps()
        if maps is None:
            raise NonAffineError(f"embedding {self.embedding} is not axis-affine")
        boxes = []
        for piece_box in self.domain.boxes:
            for box in region.boxes:
                for part in piece_box.meet(box, self.domain.periodic):
                    boxes.append(box_image(part, piece_box, maps, self.domain.periodic, target_periodic))
        return boxes

    def preimage(self, region: Domain) -> Domain:
        maps = self.maps()
        if maps is None:
            raise NonAffineError(f"embedding {self.embedding} is not axis-affine")
        boxes = []
        for piece_box in self.domain.boxes:
            for box in region.boxes:
                boxes.extend(box_preimage(piece_box, maps, self.domain.periodic, region.periodic, box))
        return self.domain.with_boxes(boxes)


def _axis_maps(embedding: ExprMap) -> Optional[Tuple[AxisMap, ...]]:
    return _axis_maps_cached(embedding)


@lru_cache(maxsize=1024)
def _axis_maps_cached(embedding: ExprMap) -> Optional[Tuple[AxisMap, ...]]:
    maps = embedding.axis_affine()
    return None if maps is None else tuple(maps)


@dataclass(frozen=True)
class CoordChange:
    """
    Coordinate change from chart ``source`` to chart ``target``.

    ``linear`` is phihat as a (obs_dim target) x (obs_dim source) matrix and
    ``target_periodic`` the periodic flags of the target domain.
    """
    source: Label
    target: Label
    pieces: Tuple[ChangePiece, ...]
    linear: RationalMatrix
    target_periodic: Tuple[bool, ...]

    @staticmethod
    def single(source, target, domain: Domain, embedding: ExprMap, linear: RationalMatrix,
               target_periodic: Sequence[bool]) -> "CoordChange":
        return CoordChange(label_of(source), label_of(target), (ChangePiece(domain, embedding),), linear,
                           tuple(target_periodic))

    @property
    def domain(self) -> Domain:
        return Domain.union_of([piece.domain for piece in self.pieces])

    @property
    def source_dim(self) -> int:
        return self.pieces[0].domain.dim

    @property
    def target_dim(self) -> int:
        return len(self.target_periodic)

    def is_affine(self) -> bool:
        return all(piece.maps() is not None for piece in self.pieces)

    def locate(self, x: Sequence) -> Optional[Tuple[ChangePiece, Tuple[Fraction, ...]]]:
        for piece in self.pieces:
            found = piece.locate(x)
            if found is not None:
                return piece, found[1]
        return None

    def _reduce(self, values: Sequence) -> Tuple:
        return tuple(v % 1 if p else v for v, p in zip(values, self.target_periodic))

    def apply(self, x: Sequence) -> Tuple:
        """
        Exact image of a point of the domain.

        :raises ValueError: when x is outside the domain.
        """
        found = self.locate(x)
        if found is None:
            raise ValueError(f"point {tuple(str(v) for v in x)} is outside the domain of {self}")
        piece, lifted = found
        return self._reduce(piece.embedding.evaluate(lifted))

    def apply_array(self, points: np.ndarray) -> np.ndarray:
        """Float images; rows outside the domain are NaN."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        result = np.full((len(points), self.target_dim), np.nan)
        done = np.zeros(len(points), dtype=bool)
        for piece in self.pieces:
            for box in piece.domain.boxes:
                single = Domain(piece.domain.dim, (box,), piece.domain.periodic)
                mask = single.contains_points(points) & ~done
                if not mask.any():
                    continue
                values = piece.embedding.evaluate_array(piece.lift_array(box, points[mask]))
                result[mask] = values
                done |= mask
        for k, p in enumerate(self.target_periodic):
            if p:
                result[:, k] = np.mod(result[:, k], 1.0)
        return result

    def jacobian(self, x: Sequence) -> RationalMatrix:
        found = self.locate(x)
        if found is None:
            raise ValueError(f"point is outside the domain of {self}")
        piece, lifted = found
        return piece.embedding.jacobian(lifted)

    def image(self, region: Optional[Domain] = None) -> Domain:
        """Exact image of ``region`` (default: the whole domain) in the target chart."""
        region = self.domain if region is None else region
        boxes = []
        for piece in self.pieces:
            boxes.extend(piece.image(region, self.target_periodic))
        return Domain(self.target_dim, (), self.target_periodic).with_boxes(boxes)

    def preimage(self, region: Domain) -> Domain:
        """Exact preimage of a target region; a subset of the domain."""
        parts = [piece.preimage(region) for piece in self.pieces]
        return Domain.union_of(parts)

    def inverse_point(self, y: Sequence) -> Optional[Tuple[Fraction, ...]]:
        """The point x of the domain with phi(x) = y, or None."""
        for piece in self.pieces:
            maps = piece.maps()
            if maps is None:
                raise NonAffineError(f"embedding {piece.embedding} is not axis-affine")
            for box in piece.domain.boxes:
                x = solve_affine(box, maps, piece.domain.periodic, self.target_periodic, y)
                if x is not None:
                    return x
        return None

    def restricted(self, domain: Domain) -> "CoordChange":
        pieces = []
        for piece in self.pieces:
            cut = piece.domain.intersection(domain)
            if not cut.is_empty():
                pieces.append(ChangePiece(cut, piece.embedding))
        if not pieces:
            pieces = [ChangePiece(Domain.empty(domain.dim, domain.periodic), self.pieces[0].embedding)]
        return replace(self, pieces=tuple(pieces))

    def __str__(self) -> str:
        return f"change {format_label(self.source)}->{format_label(self.target)}"


def identity_change(chart: Chart, target: Optional[Chart] = None) -> CoordChange:
    """Identity embedding of ``chart`` into ``target`` (default: itself) on the common domain."""
    target = chart if target is None else target
    domain = chart.domain.intersection(target.domain)
    return CoordChange.single(chart.label, target.label, domain, ExprMap.identity(chart.domain.dim),
                              RationalMatrix.identity(chart.obs_dim), target.domain.periodic)


def restrict_chart(chart: Chart, footprint: Domain, precompact: bool = False) -> Chart:
    """
    Restrict ``chart`` to the footprint subregion ``footprint``.

    The new domain is a union of cylinders around the boxes of
    Z' = s^{-1}(0) ∩ psi^{-1}(F'): each box is thickened along its normal (point)
    axes as far as the old domain allows without reaching any other zero of s. With
    ``precompact`` the cylinders are half as thick and their closures stay in U.

    :param chart: the chart to restrict.
    :param footprint: F', an open subregion of the chart's footprint.
    :param precompact: require closure(U') to lie inside U.
    :return: the restricted chart with footprint F'.
    :raises FootprintError: when F' is empty, not inside F, or has no zeros in U.
    """
    if footprint.is_empty():
        raise FootprintError(f"empty footprint for {format_label(chart.label)}")
    if not chart.footprint.contains(footprint):
        witness = chart.footprint.find_outside(footprint)
        raise FootprintError(f"footprint is not a subregion of F_{format_label(chart.label)} "
                             f"(point {tuple(str(v) for v in witness or ())})")
    zeros = chart.zero_set().intersection(chart.footprint_preimage(footprint))
    if zeros.is_empty():
        raise FootprintError(f"footprint has no zeros in chart {format_label(chart.label)}")
    if precompact and not zeros.closure_within(chart.domain):
        raise FootprintError(f"closure of the restricted zero set leaves U_{format_label(chart.label)}")
    boxes = [_cylinder(chart, box, zeros, precompact) for box in zeros.boxes]
    domain = chart.domain.with_boxes(boxes).intersection(chart.domain)
    logging.info(f"restricted chart {format_label(chart.label)} to {domain}")
    return chart.restricted_to(domain, footprint)


def _cylinder(chart: Chart, box: Box, zeros: Domain, precompact: bool) -> Box:
    axes = box.point_axes()
    if not axes:
        return box
    outer = chart.domain
    radius = cylinder_radius(box, axes, outer, closed=precompact)
    if radius is None:
        radius = HALF
    elif precompact:
        radius = radius / 2
    if radius == 0:
        raise FootprintError(f"zero box {box} is not inside U_{format_label(chart.label)}")
    for _ in range(40):
        grown = box.dilate([radius if k in axes else 0 for k in range(box.dim)], outer.periodic)
        cylinder = Domain(outer.dim, (grown,), outer.periodic)
        fits = cylinder.closure_within(outer) if precompact else outer.contains(cylinder)
        if fits and zeros.contains(zero_locus(chart.section, cylinder)):
            return grown
        radius = radius / 2
    raise FootprintError(f"no cylinder around {box} avoids the other zeros of s_{format_label(chart.label)}")


def _zero_samples(chart: Chart, region: Domain, resolution: Fraction) -> List[Tuple[Fraction, ...]]:
    """Exact samples of the zero set of ``chart`` inside ``region``."""
    try:
        zeros = zero_locus(chart.section, region)
    except ZeroSetError:
        logging.warning(f"zero set of {format_label(chart.label)} is not exact; filtering samples")
        cloud = region.sample(resolution)
        values = np.abs(chart.section.evaluate_array(cloud.points))
        close = np.flatnonzero(values.max(axis=1) <= MAP_TOLERANCE) if values.shape[1] else np.arange(len(cloud))
        return [cloud.exact(int(i)) for i in close]
    cloud = zeros.sample(resolution)
    return [cloud.exact(i) for i in range(len(cloud))]


def _periodic_gap(a: np.ndarray, b: np.ndarray, periodic: Sequence[bool]) -> np.ndarray:
    diff = np.abs(a - b)
    for k, p in enumerate(periodic):
        if p:
            wrapped = np.mod(diff[:, k], 1.0)
            diff[:, k] = np.minimum(wrapped, 1.0 - wrapped)
    return diff.max(axis=1) if diff.shape[1] else np.zeros(len(diff))


def check_map_axioms(change: CoordChange, source: Chart, target: Chart, resolution=None,
                     tolerance: float = MAP_TOLERANCE) -> CheckReport:
    """
    Sampled check that ``change`` is a map of charts.

    Verifies phi(U_IJ) inside U_J, s_J o phi = phihat o s_I and, on the zero set,
    psi_J o phi = psi_I.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    report = CheckReport(f"maps {format_label(change.source)}->{format_label(change.target)}")
    domain = change.domain
    if domain.is_empty():
        report.details["samples"] = 0
        return report.sampled()
    cloud = domain.sample(resolution)
    points = cloud.points
    mapped = change.apply_array(points)
    inside = target.domain.contains_points(mapped, slack=tolerance)
    outside = np.flatnonzero(~inside)
    if outside.size:
        witness = cloud.exact(int(outside[0]))
        report.fail(MapAxiomViolation("embedding leaves the target domain", witness), "phi(U_IJ)", witness)
    rows = np.flatnonzero(inside)
    lhs = target.section.evaluate_array(mapped[rows])
    rhs = source.section.evaluate_array(points[rows]) @ change.linear.to_numpy().T
    deviation = np.abs(lhs - rhs).max(axis=1) if lhs.shape[1] and len(rows) else np.zeros(len(rows))
    report.details["samples"] = len(points)
    report.details["max_deviation"] = float(deviation.max()) if len(deviation) else 0.0
    bad = np.flatnonzero(deviation > tolerance)
    if bad.size:
        witness = cloud.exact(int(rows[bad[0]]))
        report.fail(MapAxiomViolation(f"s_J o phi differs from phihat o s_I by {deviation[bad[0]]:.3g}", witness),
                    "section", witness)
    zeros = _zero_samples(source, domain, resolution)
    if zeros:
        exact = np.array([[float(v) for v in z] for z in zeros])
        images = change.apply_array(exact)
        gap = _periodic_gap(target.footprint_points(images), source.footprint_points(exact),
                            source.footprint.periodic)
        report.details["max_footprint_gap"] = float(gap.max())
        worst = np.flatnonzero(gap > tolerance)
        if worst.size:
            witness = zeros[int(worst[0])]
            report.fail(MapAxiomViolation("psi_J o phi differs from psi_I on the zero set", witness),
                        "footprint", witness)
    return report.sampled()


def check_index_condition(change: CoordChange, source: Chart, target: Chart,
                          samples: Optional[Sequence[Sequence]] = None, resolution=None) -> CheckReport:
    """
    Index condition at sampled zeros: rank [ds_J | phihat] = dim E_J with dphi and
    phihat injective, which is ds_J inducing T U_J / dphi(T U_I) = E_J / phihat(E_I).

    :param samples: points of U_IJ; defaults to exact zero-set samples.
    """
    report = CheckReport(f"index {format_label(change.source)}->{format_label(change.target)}")
    report.details["dim_source"] = source.dim
    report.details["dim_target"] = target.dim
    if source.dim != target.dim:
        return report.fail(IndexConditionViolation(
            f"charts have different dimensions {source.dim} and {target.dim}"), "dim")
    phihat = change.linear
    if phihat.rank() != source.obs_dim:
        return report.fail(IndexConditionViolation("phihat is not injective"), "phihat")
    if samples is None:
        resolution = default_resolution() if resolution is None else as_fraction(resolution)
        samples = _zero_samples(source, change.domain, resolution)
    checked = 0
    for x in samples:
        x = tuple(as_fraction(v) for v in x)
        found = change.locate(x)
        if found is None:
            continue
        piece, lifted = found
        y = change.apply(x)
        dphi = piece.embedding.jacobian(lifted)
        if dphi.rank() != source.domain.dim:
            report.fail(IndexConditionViolation(f"dphi is not injective at {_show(x)}", x), "dphi", x)
            break
        rank = RationalMatrix.hstack(target.section.jacobian(y), phihat).rank()
        checked += 1
        if rank != target.obs_dim:
            report.fail(IndexConditionViolation(
                f"[ds_J | phihat] has rank {rank} < {target.obs_dim} at {_show(x)}", x), "rank", x)
            report.details["rank"] = rank
            break
    report.details["samples"] = checked
    return report.sampled()


def _show(x: Sequence) -> str:
    return "(" + ", ".join(str(v) for v in x) + ")"


def _shift_map(in_dim: int, offsets: Sequence[Fraction]) -> ExprMap:
    return ExprMap(in_dim, tuple(add(Var(k), Const(as_fraction(o))) if o else Var(k) for k, o in enumerate(offsets)))


def _translate(expr_map: ExprMap, offsets: Sequence[int]) -> ExprMap:
    return ExprMap(expr_map.in_dim, tuple(add(c, Const(Fraction(n))) if n else c
                                          for c, n in zip(expr_map.components, offsets)))


def _source_offsets(region: Box, piece_box: Box, periodic: Sequence[bool]) -> List[int]:
    offsets = []
    for iv, outer, p in zip(region.intervals, piece_box.intervals, periodic):
        if not p or outer.full:
            offsets.append(0)
            continue
        lo, _ = _lift(iv, True, outer)
        offsets.append(int(lo - iv.lo))
    return offsets


def _target_offsets(lifted: Sequence[Interval], maps: Sequence[AxisMap], target_box: Box,
                    periodic: Sequence[bool]) -> List[int]:
    """Integer shifts moving the raw image of ``lifted`` into the real range of ``target_box``."""
    offsets = []
    for (k, a, b), outer, p in zip(maps, target_box.intervals, periodic):
        if not p or outer.full or (k is not None and lifted[k].full):
            offsets.append(0)
            continue
        if k is None or a == 0:
            lo = hi = b
        else:
            lo, hi = sorted((a * lifted[k].lo + b, a * lifted[k].hi + b))
        start = math.floor(outer.lo - lo)
        offsets.append(next((n for n in range(start, start + 3) if outer.lo <= lo + n and hi + n <= outer.hi), 0))
    return offsets


def compose_changes(first: CoordChange, second: CoordChange, footprints: Optional[Dict[Label, Domain]] = None,
                    charts: Optional[Dict[Label, Chart]] = None, resolution=None) -> CoordChange:
    """
    The composite second o first on first^{-1}(domain of second).

    :param footprints: footprints by label, used to check F_I ∩ F_K inside F_J.
    :param charts: charts by label; when given the composite's index condition is re-certified.
    :raises CompositionError: mismatched labels, failing footprint precondition, or a
        non-affine first change.
    """
    if first.target != second.source:
        raise CompositionError(f"cannot compose {first} with {second}")
    if footprints is not None:
        fi, fj, fk = footprints[first.source], footprints[first.target], footprints[second.target]
        if not fj.contains(fi.intersection(fk)):
            raise CompositionError(
                f"F_{format_label(first.source)} ∩ F_{format_label(second.target)} is not inside "
                f"F_{format_label(first.target)}")
    pieces = []
    for p1 in first.pieces:
        maps = p1.maps()
        if maps is None:
            raise CompositionError(f"{first} is not axis-affine; its composite domain is not exact")
        periodic = p1.domain.periodic
        for box1 in p1.domain.boxes:
            for p2 in second.pieces:
                for box2 in p2.domain.boxes:
                    for region in box_preimage(box1, maps, periodic, first.target_periodic, box2):
                        source_shift = _source_offsets(region, box1, periodic)
                        inner = p1.embedding.compose(_shift_map(len(periodic), source_shift))
                        lifted = [Interval(iv.lo + s, iv.hi + s, iv.full)
                                  for iv, s in zip(region.intervals, source_shift)]
                        inner = _translate(inner, _target_offsets(lifted, maps, box2, first.target_periodic))
                        embedding = p2.embedding.compose(inner)
                        pieces.append(ChangePiece(Domain(len(periodic), (region,), periodic), embedding))
    if not pieces:
        empty = Domain.empty(first.source_dim, first.pieces[0].domain.periodic)
        pieces = [ChangePiece(empty, second.pieces[0].embedding.compose(first.pieces[0].embedding))]
    composite = CoordChange(first.source, second.target, tuple(pieces), second.linear @ first.linear,
                            second.target_periodic)
    if charts is not None:
        check_index_condition(composite, charts[first.source], charts[second.target],
                              resolution=resolution).raise_for_status()
    return composite
