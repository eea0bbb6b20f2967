"""
Admissible constants, zone families and adapted perturbations of a tame atlas.

Chart domains carry the sup metric, so every ball neighbourhood of a box union is
again an exact box union, and axis-affine coordinate changes of slope +-1 are
isometries. Obstruction spaces carry the maximum norm of the components in the
additivity decomposition E_J = sum phihat_iJ(E_i).
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from kuranishi_atlas.atlas import Atlas, orbit, sort_key
from kuranishi_atlas.chart import CoordChange, Label
from kuranishi_atlas.config import TRANSVERSALITY_RETRIES, default_resolution
from kuranishi_atlas.errors import (
    AdaptedError,
    ConstantsError,
    NonAffineError,
    TransversalityError,
    ZeroIsolationError,
    ZoneError,
    format_label,
)
from kuranishi_atlas.expr import ONE, ZERO, Const, ExprMap, Expr, Step, Var, add, div, mul, sub
from kuranishi_atlas.exterior import RationalMatrix
from kuranishi_atlas.geometry import Domain, MetricSample, SampleCloud, as_fraction
from kuranishi_atlas.reduction import AtlasReduction, renest
from kuranishi_atlas.reports import CheckReport
from kuranishi_atlas.zeroset_vfc import isolate_zeros, snap_rational

ROUNDING = 2 ** 56
COEFFICIENT_DENOMINATOR = 2 ** 20
SAMPLE_CAP = 4096
SINGULAR_VALUE_FLOOR = 1e-4
COMPATIBILITY_TOLERANCE = 1e-9
REFINEMENTS = 2


def directed(value) -> Fraction:
    """Round an exact sympy value down to the grid 2^-56."""
    return Fraction(int(sympy.floor(sympy.sympify(value) * ROUNDING)), ROUNDING)


def eta_formula(level, delta) -> sympy.Expr:
    """eta_k = 2^-k (1 - 2^(-1/4)) delta, exactly."""
    level = sympy.Rational(str(as_fraction(level)))
    delta = sympy.Rational(str(as_fraction(delta)))
    return 2 ** (-level) * (1 - 2 ** sympy.Rational(-1, 4)) * delta


def radius_formula(level, delta) -> sympy.Expr:
    level = sympy.Rational(str(as_fraction(level)))
    return 2 ** (-level) * sympy.Rational(str(as_fraction(delta)))


@dataclass
class PerturbationConstants:
    delta_V: Fraction
    delta: Fraction
    sigma_bound: float
    sigma: float
    levels: int
    resolution: Fraction
    _cache: Dict[Tuple[str, Fraction], Fraction] = field(default_factory=dict, repr=False)

    def eta(self, level) -> Fraction:
        """
        eta at a (quarter integer) level: the gap radius(level) - radius(level + 1/4)
        of the rounded radii, within 2^-55 of :func:`eta_formula`.
        """
        level = as_fraction(level)
        return self.radius(level) - self.radius(level + Fraction(1, 4))

    def radius(self, level) -> Fraction:
        """2^-level delta, rounded down; the growth of V^level over V."""
        key = ("radius", as_fraction(level))
        if key not in self._cache:
            self._cache[key] = directed(radius_formula(level, self.delta))
        return self._cache[key]

    def eta_table(self) -> Dict[Fraction, Fraction]:
        return {level: self.eta(level) for level in quarter_levels(self.levels)}

    def to_dict(self) -> Dict[str, str]:
        return {"delta_V": str(self.delta_V), "delta": str(self.delta), "sigma_bound": f"{self.sigma_bound:.12g}",
                "sigma": f"{self.sigma:.12g}", "eta_0": str(self.eta(0))}


def quarter_levels(top: int) -> List[Fraction]:
    return [Fraction(q, 4) for q in range(4 * top + 1)]


# norms


def decomposition(atlas: Atlas, label: Label) -> np.ndarray:
    """Matrix P with P e = (e_i)_i for e = sum phihat_iJ(e_i)."""
    chart = atlas.chart(label)
    if len(label) == 1:
        return np.eye(chart.obs_dim)
    blocks = [atlas.change(frozenset({i}), label).linear for i in sorted(label)]
    stacked = RationalMatrix.hstack(*blocks)
    return stacked.inverse().to_numpy()


def obstruction_norm(atlas: Atlas, label: Label, values: np.ndarray) -> np.ndarray:
    """Maximum norm of the basic components of each row of ``values``."""
    values = np.atleast_2d(values)
    if values.shape[1] == 0:
        return np.zeros(len(values))
    return np.max(np.abs(values @ decomposition(atlas, label).T), axis=1)


def _operator_bound(atlas: Atlas, label: Label, jacobians: np.ndarray) -> float:
    if jacobians.size == 0:
        return 0.0
    projected = np.einsum("ij,njk->nik", decomposition(atlas, label), jacobians)
    return float(np.max(np.sum(np.abs(projected), axis=2)))


def _sample(domain: Domain, resolution, cap: int = SAMPLE_CAP) -> Tuple[np.ndarray, Fraction]:
    cloud = SampleCloud(domain, resolution)
    points = cloud.points
    if len(points) > cap:
        points = points[:: math.ceil(len(points) / cap)]
    return points, cloud.spacing


# zones


def _push(atlas: Atlas, source: Label, target: Label, region: Domain) -> Domain:
    change = atlas.change(source, target)
    return change.image(region.intersection(change.domain))


class ZoneFamily:
    """
    The neighbourhoods V^k_I = B_{2^-k delta}(V_I), the core pieces
    N^k_JI = V^k_J ∩ phi_IJ(V^k_I ∩ U_IJ), and the enlarged footprints
    C~_J = union over K ⊇ J of phi_JK^{-1}(C_K). Levels are quarter integers.
    """

    def __init__(self, atlas: Atlas, reduction: AtlasReduction, nested: AtlasReduction,
                 constants: PerturbationConstants) -> None:
        self.atlas = atlas
        self.reduction = reduction
        self.nested = nested
        self.constants = constants
        self._zones: Dict[Tuple[Label, Fraction], Domain] = {}
        self._cores: Dict[Tuple[Label, Label, Fraction], Domain] = {}
        self._shadows: Dict[Label, Domain] = {}

    def labels(self) -> List[Label]:
        return self.reduction.nonempty()

    def zone(self, label: Label, level) -> Domain:
        key = (label, as_fraction(level))
        if key not in self._zones:
            base = self.reduction.domains[label]
            self._zones[key] = base.epsilon_neighbourhood(self.constants.radius(level), "sup")
        return self._zones[key]

    def core_piece(self, label: Label, lower: Label, level) -> Domain:
        key = (label, lower, as_fraction(level))
        if key not in self._cores:
            self._cores[key] = self.zone(label, level).intersection(
                _push(self.atlas, lower, label, self.zone(lower, level)))
        return self._cores[key]

    def core(self, label: Label, level) -> Domain:
        chart = self.atlas.chart(label)
        pieces = [self.core_piece(label, lower, level) for lower in self.lower(label)]
        result = Domain.empty(chart.domain.dim, chart.domain.periodic)
        for piece in pieces:
            result = result.union(piece)
        return result

    def guard(self, label: Label, lower: Label, level, eta_level) -> Domain:
        """B_{eta(eta_level)}(N^level_{label,lower})."""
        piece = self.core_piece(label, lower, level)
        if piece.is_empty():
            return piece
        return piece.epsilon_neighbourhood(self.constants.eta(eta_level), "sup")

    def lower(self, label: Label) -> List[Label]:
        """I ⊊ J with V_I nonempty, largest first."""
        found = [other for other in self.labels() if other < label]
        return sorted(found, key=lambda other: (-len(other), sort_key(other)))

    def shadow(self, label: Label) -> Domain:
        if label not in self._shadows:
            chart = self.atlas.chart(label)
            result = Domain.empty(chart.domain.dim, chart.domain.periodic)
            for upper in self.nested.nonempty():
                if not label <= upper:
                    continue
                region = self.nested.domains[upper]
                if upper != label:
                    region = self.atlas.change(label, upper).preimage(region)
                result = result.union(region)
            self._shadows[label] = result
        return self._shadows[label]

    def excluded(self, label: Label) -> Domain:
        """The part of V^|J|_J left out of the infimum defining sigma."""
        level = len(label)
        result = self.shadow(label)
        for lower in self.lower(label):
            guard = self.guard(label, lower, level - Fraction(1, 4), level - Fraction(1, 2))
            if not guard.is_empty():
                result = result.union(guard)
        return result

    def in_footprint_shadow(self, label: Label, point: Sequence) -> bool:
        """Whether (label, point) is equivalent to a point of some C_K."""
        exact = snap_rational(point)
        if self.shadow(label).contains_point(exact):
            return True
        nodes, _ = orbit(self.atlas, label, exact)
        for node in nodes:
            region = self.nested.domains.get(node.label)
            if region is not None and region.contains_point(node.point):
                return True
        return False


# constants


def compute_constants(atlas: Atlas, reduction: AtlasReduction, nested: AtlasReduction,
                      metric: Optional[MetricSample] = None, resolution=None, delta=None,
                      sigma=None) -> PerturbationConstants:
    """
    delta_V from the clearance of V_I in U_I and the separation of incomparable V_I,
    a chosen delta < delta_V (half of it by default), and a certified lower bound for
    sigma(delta, V, C) from sampled values of ||s_J|| off C~_J and the core guards,
    less a sampled Lipschitz correction. The resolution is refined twice before
    giving up.

    :raises ConstantsError: when delta_V or the sigma bound is not positive.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    labels = reduction.nonempty()
    if not labels:
        raise ConstantsError("the reduction is empty")
    bounds: List[Fraction] = []
    for label in labels:
        clearance = atlas.chart(label).domain.clearance(reduction.domains[label])
        if clearance != math.inf:
            bounds.append(as_fraction(clearance) / 2)
    for label in labels:
        bounds.extend(_separation_of(atlas, reduction, label, labels))
    if metric is not None:
        bounds.extend(_metric_separation(atlas, reduction, metric, labels, resolution))
    delta_V = min(bounds) if bounds else Fraction(1)
    if delta_V <= 0:
        raise ConstantsError(f"delta_V = {delta_V}: the reduction touches the chart boundaries or itself")
    if delta is None:
        delta = delta_V / 2
    delta = as_fraction(delta)
    if not 0 < delta < delta_V:
        raise ConstantsError(f"delta = {delta} is not in (0, {delta_V})")
    constants = PerturbationConstants(delta_V, delta, 0.0, 0.0, atlas.max_order, resolution)
    zones = ZoneFamily(atlas, reduction, nested, constants)
    bound = -math.inf
    step = resolution
    for attempt in range(REFINEMENTS + 1):
        bound = _sigma_bound(atlas, zones, step)
        if bound > 0:
            break
        if attempt < REFINEMENTS:
            logging.warning(f"sigma bound {bound:.3g} at resolution {step}; refining")
            step /= 2
    if bound <= 0:
        raise ConstantsError(f"sigma lower bound {bound:.3g} is not positive at resolution {step}")
    constants.sigma_bound = bound
    if sigma is not None and not 0 < float(sigma) <= bound:
        raise ConstantsError(f"sigma = {sigma} is not in (0, {bound:.6g}]")
    constants.sigma = bound if sigma is None else float(sigma)
    logging.info(f"constants: delta_V {delta_V}, delta {delta}, sigma {constants.sigma:.6g}")
    return constants


def second_reduction(atlas: Atlas, nested: AtlasReduction, metric: Optional[MetricSample] = None,
                     resolution=None) -> Tuple[AtlasReduction, AtlasReduction, PerturbationConstants]:
    """The nested pair (C, C') of :func:`renest` with its own constants."""
    inner = renest(atlas, nested)
    return nested, inner, compute_constants(atlas, nested, inner, metric=metric, resolution=resolution)


def _separation_of(atlas: Atlas, reduction: AtlasReduction, label: Label, labels: List[Label]) -> List[Fraction]:
    bounds = []
    for other in labels:
        if sort_key(other) <= sort_key(label) or other <= label or label <= other:
            continue
        for upper in atlas.labels:
            if not (label | other) <= upper:
                continue
            first = _image_of(atlas, reduction, label, upper)
            second = _image_of(atlas, reduction, other, upper)
            distance = first.sup_distance_to(second)
            if distance != math.inf:
                bounds.append(as_fraction(distance) / 4)
    return bounds


def _image_of(atlas: Atlas, reduction: AtlasReduction, label: Label, upper: Label) -> Domain:
    region = reduction.domains[label]
    return region if label == upper else _push(atlas, label, upper, region)


def _metric_separation(atlas: Atlas, reduction: AtlasReduction, metric: MetricSample, labels: List[Label],
                       resolution: Fraction) -> List[Fraction]:
    quotient = metric.base
    objects: Dict[Label, List[int]] = {}
    for label in labels:
        cloud = quotient.clouds[label]
        inside = np.flatnonzero(reduction.domains[label].contains_points(cloud.points))
        if len(inside) > 32:
            inside = inside[:: math.ceil(len(inside) / 32)]
        objects[label] = [quotient.offsets[label] + int(i) for i in inside]
    bounds = []
    for label in labels:
        for other in labels:
            if sort_key(other) <= sort_key(label) or other <= label or label <= other:
                continue
            if any((label | other) <= upper for upper in atlas.labels):
                continue
            if not objects[label] or not objects[other]:
                continue
            matrix = metric.matrix(objects[label] + objects[other])
            distance = float(np.min(matrix[:len(objects[label]), len(objects[label]):]))
            if not math.isfinite(distance):
                continue
            slack = distance - 2 * float(resolution)
            if slack <= 0:
                raise ConstantsError(f"V_{format_label(label)} and V_{format_label(other)} are within 2h in the metric")
            bounds.append(Fraction(slack).limit_denominator(COEFFICIENT_DENOMINATOR) / 4)
    return bounds


def _sigma_bound(atlas: Atlas, zones: ZoneFamily, resolution: Fraction) -> float:
    best = math.inf
    for label in zones.labels():
        chart = atlas.chart(label)
        points, spacing = _sample(zones.zone(label, len(label)), resolution, cap=4 * SAMPLE_CAP)
        if not len(points):
            continue
        if chart.obs_dim == 0:
            continue
        inner = zones.excluded(label).shrink(spacing / 2)
        keep = ~inner.contains_points(points) if not inner.is_empty() else np.ones(len(points), dtype=bool)
        if not keep.any():
            continue
        norms = obstruction_norm(atlas, label, chart.section.evaluate_array(points[keep]))
        lipschitz = _operator_bound(atlas, label, chart.section.jacobian_array(points))
        bound = float(np.min(norms)) - lipschitz * float(spacing) / 2
        logging.debug(f"sigma bound for {format_label(label)}: {bound:.6g}")
        best = min(best, bound)
    return 1.0 if best == math.inf else best


def build_zones(atlas: Atlas, reduction: AtlasReduction, nested: AtlasReduction,
                constants: PerturbationConstants) -> ZoneFamily:
    """
    The zone family with its invariants re-verified exactly: B_{2 delta}(V_I) ⋐ U_I,
    precompact nesting of the core pieces along the quarter levels, separation of
    incomparable core pieces, and im phi_IJ ∩ B_{eta(k+1/2)}(N^{k+3/4}_JI) ⊆ N^{k+1/2}_JI.

    :raises ZoneError: with the failing invariant.
    """
    zones = ZoneFamily(atlas, reduction, nested, constants)
    levels = quarter_levels(atlas.max_order)
    for label in zones.labels():
        grown = reduction.domains[label].epsilon_neighbourhood(2 * constants.delta, "sup")
        if not grown.closure_within(atlas.chart(label).domain):
            raise ZoneError(f"B_2delta(V_{format_label(label)}) is not precompact in U_{format_label(label)}")
        for level in range(atlas.max_order):
            inner = zones.zone(label, level + Fraction(1, 2)).epsilon_neighbourhood(constants.eta(level), "sup")
            if not zones.zone(label, level).contains(inner):
                raise ZoneError(f"B_eta_{level}(V^{level}+1/2_{format_label(label)}) leaves V^{level}")
    for label in zones.labels():
        lower = zones.lower(label)
        for piece in lower:
            for finer, coarser in zip(levels[1:], levels[:-1]):
                small = zones.core_piece(label, piece, finer)
                if not small.is_empty() and not small.closure_within(zones.core_piece(label, piece, coarser)):
                    raise ZoneError(f"N^{finer}_{format_label(label)},{format_label(piece)} is not precompact "
                                    f"in N^{coarser}")
            image = atlas.change(piece, label).image()
            for level in range(atlas.max_order + 1):
                wide = zones.guard(label, piece, level + Fraction(3, 4), level + Fraction(1, 2))
                if wide.is_empty():
                    continue
                if not zones.core_piece(label, piece, level + Fraction(1, 2)).contains(image.intersection(wide)):
                    raise ZoneError(f"the eta-neighbourhood of N^{level}+3/4_{format_label(label)},"
                                    f"{format_label(piece)} meets im phi outside N^{level}+1/2")
        for first in lower:
            for second in lower:
                if sort_key(first) >= sort_key(second) or first <= second or second <= first:
                    continue
                gap = zones.core_piece(label, first, 0).sup_distance_to(zones.core_piece(label, second, 0))
                if gap < 2 * constants.delta:
                    raise ZoneError(f"core pieces of {format_label(first)} and {format_label(second)} in "
                                    f"{format_label(label)} are closer than 2 delta")
    logging.info(f"zones verified on {len(zones.labels())} charts")
    return zones


# perturbations


@dataclass
class Perturbation:
    """Sections nu_I on V^|I|_I, as expressions valid on all of the chart domain."""
    sections: Dict[Label, ExprMap]
    domains: Dict[Label, Domain]
    seed: int
    transcript: List[str] = field(default_factory=list)

    def section(self, atlas: Atlas, label: Label) -> ExprMap:
        chart = atlas.chart(label)
        return self.sections.get(label, ExprMap.zero(chart.domain.dim, chart.obs_dim))

    def perturbed(self, atlas: Atlas, label: Label) -> ExprMap:
        """s_I + nu_I."""
        chart = atlas.chart(label)
        nu = self.section(atlas, label)
        return ExprMap(chart.domain.dim, tuple(add(a, b) for a, b in zip(chart.section.components, nu.components)))

    def sup_norm(self, atlas: Atlas, label: Label, resolution) -> float:
        domain = self.domains.get(label)
        if domain is None or domain.is_empty():
            return 0.0
        points, _ = _sample(domain, resolution)
        if not len(points):
            return 0.0
        return float(np.max(obstruction_norm(atlas, label, self.section(atlas, label).evaluate_array(points))))

    def texts(self) -> Dict[Label, List[str]]:
        return {label: section.texts() for label, section in self.sections.items()}


def inverse_projection(change: CoordChange) -> ExprMap:
    """
    The affine map pi: R^dim U_J -> R^dim U_I with pi(phi_IJ(x)) = x.

    :raises NonAffineError: unless the change is a single axis-affine piece that
        reads off every source coordinate.
    """
    if len(change.pieces) != 1:
        raise NonAffineError(f"{change} has several pieces")
    maps = change.pieces[0].embedding.axis_affine()
    if maps is None:
        raise NonAffineError(f"{change} is not axis-affine")
    components: List[Expr] = []
    for axis in range(change.source_dim):
        found = next(((j, a, b) for j, (k, a, b) in enumerate(maps) if k == axis and a != 0), None)
        if found is None:
            raise NonAffineError(f"{change} forgets the coordinate x{axis + 1}")
        j, a, b = found
        components.append(div(sub(Var(j), Const(b)), Const(a)))
    return ExprMap(change.target_dim, tuple(components))


def pushforward(atlas: Atlas, lower: Label, label: Label, nu: ExprMap) -> ExprMap:
    """mu(y) = phihat_IJ nu_I(pi_IJ(y))."""
    change = atlas.change(lower, label)
    return nu.compose(inverse_projection(change)).linear_combination(change.linear)


def _plateau(axis: int, lo: Fraction, hi: Fraction, margin: Fraction) -> Expr:
    rising = Step(div(sub(Var(axis), Const(lo - margin)), Const(margin)))
    falling = Step(div(sub(Const(hi + margin), Var(axis)), Const(margin)))
    return mul(rising, falling)


def bump(center: Sequence, inner: Sequence, outer: Sequence) -> Expr:
    """
    Product bump equal to 1 on the box |x_k - c_k| <= inner_k and 0 outside
    |x_k - c_k| < outer_k. Axes with a negative inner radius are left unconstrained.
    """
    result: Expr = ONE
    for axis, (c, r, s) in enumerate(zip(center, inner, outer)):
        c, r, s = as_fraction(c), as_fraction(r), as_fraction(s)
        if r < 0:
            continue
        if s <= r:
            raise ValueError(f"outer radius {s} is not larger than inner radius {r}")
        result = mul(result, _plateau(axis, c - r, c + r, s - r))
    return result


def region_bump(region: Domain, margin: Fraction) -> Expr:
    """1 on the closure of ``region``, 0 at sup-distance >= ``margin`` from it."""
    if region.is_empty():
        return ZERO
    outside: Expr = ONE
    for box in region.boxes:
        center, inner, outer = [], [], []
        for iv in box.intervals:
            if iv.full:
                center.append(0)
                inner.append(-1)
                outer.append(0)
                continue
            center.append((iv.lo + iv.hi) / 2)
            inner.append((iv.hi - iv.lo) / 2)
            outer.append((iv.hi - iv.lo) / 2 + margin)
        outside = mul(outside, sub(ONE, bump(center, inner, outer)))
    return sub(ONE, outside)


def _random_section(rng: np.random.Generator, chart, zone: Domain, scale: float) -> ExprMap:
    """Constant plus linear term with sup norm at most ``scale`` on the bounding box of ``zone``."""
    box = zone.bounding_box()
    center = [iv.midpoint() for iv in box.intervals]
    half = [iv.length / 2 for iv in box.intervals]
    components = []
    for _ in range(chart.obs_dim):
        raw = rng.uniform(-1.0, 1.0, size=chart.domain.dim + 1)
        reach = abs(raw[0]) + sum(abs(a) * float(h) for a, h in zip(raw[1:], half))
        factor = scale / reach if reach > 0 else 0.0
        constant = Fraction(raw[0] * factor).limit_denominator(COEFFICIENT_DENOMINATOR)
        term: Expr = Const(constant)
        for axis, a in enumerate(raw[1:]):
            slope = Fraction(a * factor).limit_denominator(COEFFICIENT_DENOMINATOR)
            term = add(term, mul(Const(slope), sub(Var(axis), Const(center[axis]))))
        components.append(term)
    return ExprMap(chart.domain.dim, tuple(components))


def transversality_defect(atlas: Atlas, label: Label, section: ExprMap, domain: Domain, resolution,
                          zones: Optional[ZoneFamily] = None) -> Optional[Tuple[str, object]]:
    """
    None when s + nu is transverse on ``domain`` (and, given zones, its zeros lie over
    C); otherwise (condition, witness).
    """
    if domain.is_empty():
        return None
    if section.in_dim == section.out_dim:
        try:
            zeros = isolate_zeros(section, domain, resolution)
        except ZeroIsolationError as e:
            return "b", e.box
        for point in zeros:
            jacobian = section.jacobian_array(point)[0]
            if np.linalg.svd(jacobian, compute_uv=False).min() < SINGULAR_VALUE_FLOOR:
                return "b", tuple(point)
            if zones is not None and not zones.in_footprint_shadow(label, point):
                return "d", tuple(point)
        return None
    points, spacing = _sample(domain, resolution)
    if not len(points):
        return None
    values = np.max(np.abs(section.evaluate_array(points)), axis=1)
    jacobians = section.jacobian_array(points)
    slack = float(np.max(np.sum(np.abs(jacobians), axis=2))) * float(spacing)
    for index in np.flatnonzero(values < slack):
        singular = np.linalg.svd(jacobians[index], compute_uv=False)
        if len(singular) < section.out_dim or singular.min() < SINGULAR_VALUE_FLOOR:
            return "b", tuple(points[index])
        if zones is not None and not zones.shadow(label).contains_points(points[index:index + 1])[0] \
                and not zones.in_footprint_shadow(label, points[index]):
            return "d", tuple(points[index])
    return None


def construct_adapted(atlas: Atlas, reduction: AtlasReduction, nested: AtlasReduction,
                      constants: PerturbationConstants, seed: int = 0, resolution=None,
                      zones: Optional[ZoneFamily] = None) -> Perturbation:
    """
    Build nu level by level. For |J| = k the pushed-forward sections
    mu_I = phihat_IJ nu_I pi_IJ are laid over guards around the core pieces N_JI
    with smoothstep plateaus, larger I first, and a seeded random constant plus
    linear term fills the rest:

        nu_J = b_1 mu_1 + (1 - b_1)(b_2 mu_2 + (1 - b_2)(... + tau_J))

    tau_J is drawn from a generator seeded by (seed, J), scaled below
    (sigma - ||nu~_J||) / 2, and redrawn, halving the scale every four attempts, until
    s_J + nu_J is transverse with zeros over C.

    :raises TransversalityError: when every attempt fails.
    :raises AdaptedError: when the result fails validate_adapted.
    """
    resolution = constants.resolution if resolution is None else as_fraction(resolution)
    zones = zones or build_zones(atlas, reduction, nested, constants)
    for label in zones.labels():
        if any(atlas.chart(label).domain.periodic):
            raise ZoneError(f"chart {format_label(label)} has periodic axes; perturbations need open boxes in R^n")
    sections: Dict[Label, ExprMap] = {}
    domains: Dict[Label, Domain] = {}
    transcript: List[str] = [f"seed {seed}"]
    for level in range(1, atlas.max_order + 1):
        for label in [label for label in zones.labels() if len(label) == level]:
            chart = atlas.chart(label)
            zone = zones.zone(label, level)
            domains[label] = zone
            weights: List[Tuple[Expr, ExprMap]] = []
            for lower in zones.lower(label):
                plateau = zones.guard(label, lower, level - Fraction(1, 2), level - Fraction(1, 2))
                if plateau.is_empty():
                    continue
                weight = region_bump(plateau, constants.eta(level) / 4)
                weights.append((weight, pushforward(atlas, lower, label, sections[lower])))
            base = _layered(chart, weights, ExprMap.zero(chart.domain.dim, chart.obs_dim))
            base_norm = _sampled_norm(atlas, label, base, zone, resolution)
            budget = (constants.sigma - base_norm) / 2
            if budget <= 0:
                raise TransversalityError(f"no room below sigma for {format_label(label)}: ||nu~|| = {base_norm:.3g}")
            rng = np.random.default_rng([seed, *sorted(label)])
            chosen = None
            for attempt in range(TRANSVERSALITY_RETRIES):
                tau = _random_section(rng, chart, zone, budget * 0.5 ** (attempt // 4))
                candidate = _layered(chart, weights, tau)
                total = ExprMap(chart.domain.dim, tuple(add(a, b) for a, b in
                                                        zip(chart.section.components, candidate.components)))
                defect = transversality_defect(atlas, label, total, zone, resolution, zones)
                if defect is None:
                    chosen = candidate
                    transcript.append(f"{format_label(label)}: attempt {attempt}, tau = ({', '.join(tau.texts())})")
                    break
                logging.debug(f"{format_label(label)} attempt {attempt}: condition {defect[0]} at {defect[1]}")
            if chosen is None:
                raise TransversalityError(f"s_{format_label(label)} + nu is not transverse after "
                                          f"{TRANSVERSALITY_RETRIES} attempts")
            sections[label] = chosen
        logging.info(f"construct_adapted level {level} complete")
    perturbation = Perturbation(sections, domains, seed, transcript)
    report = validate_adapted(atlas, reduction, nested, constants, perturbation, zones=zones)
    if not report.passed:
        raise report.violation
    return perturbation


def _layered(chart, weights: List[Tuple[Expr, ExprMap]], tail: ExprMap) -> ExprMap:
    result = list(tail.components)
    for weight, mu in reversed(weights):
        complement = sub(ONE, weight)
        result = [add(mul(weight, m), mul(complement, r)) for m, r in zip(mu.components, result)]
    return ExprMap(chart.domain.dim, tuple(result))


def _sampled_norm(atlas: Atlas, label: Label, section: ExprMap, domain: Domain, resolution) -> float:
    points, _ = _sample(domain, resolution)
    if not len(points):
        return 0.0
    return float(np.max(obstruction_norm(atlas, label, section.evaluate_array(points))))


def validate_adapted(atlas: Atlas, reduction: AtlasReduction, nested: AtlasReduction,
                     constants: PerturbationConstants, nu: Perturbation, resolution=None,
                     zones: Optional[ZoneFamily] = None) -> CheckReport:
    """
    Conditions a) to e) at level k = |J| for every J, on samples:

    a) nu_J(phi_IJ(x)) = phihat_IJ nu_I(x) on V^k_I ∩ phi_IJ^{-1}(V^k_J);
    b) s_J + nu_J is transverse on V^k_J;
    c) nu_J takes values in phihat_IJ(E_I) on B_{eta_k}(N^k_JI);
    d) the zeros of s_J + nu_J on V^k_J are equivalent to points of C;
    e) sup ||nu_J|| < sigma on V^k_J.
    """
    resolution = constants.resolution if resolution is None else as_fraction(resolution)
    zones = zones or ZoneFamily(atlas, reduction, nested, constants)
    report = CheckReport("adapted")
    for label in zones.labels():
        level = len(label)
        chart = atlas.chart(label)
        zone = zones.zone(label, level)
        section = nu.section(atlas, label)
        for lower in zones.lower(label):
            change = atlas.change(lower, label)
            region = zones.zone(lower, level).intersection(change.preimage(zone))
            points, _ = _sample(region, resolution, cap=512)
            if len(points):
                left = section.evaluate_array(change.apply_array(points))
                right = nu.section(atlas, lower).evaluate_array(points) @ change.linear.to_numpy().T
                deviation = np.max(np.abs(left - right), axis=1)
                worst = int(np.argmax(deviation))
                if deviation[worst] > COMPATIBILITY_TOLERANCE:
                    report.fail(AdaptedError("a", tuple(points[worst]),
                                             f"{format_label(lower)} -> {format_label(label)} off by "
                                             f"{deviation[worst]:.3g}"), format_label(label))
            guard = zones.guard(label, lower, level, level).intersection(zone)
            points, _ = _sample(guard, resolution, cap=512)
            complement = change.linear.transpose().nullspace()
            if len(points) and complement.cols:
                values = section.evaluate_array(points) @ complement.to_numpy()
                off = np.max(np.abs(values), axis=1)
                worst = int(np.argmax(off))
                if off[worst] > COMPATIBILITY_TOLERANCE:
                    report.fail(AdaptedError("c", tuple(points[worst]),
                                             f"nu_{format_label(label)} leaves phihat(E_{format_label(lower)})"),
                                format_label(label))
        defect = transversality_defect(atlas, label, nu.perturbed(atlas, label), zone, resolution, zones)
        if defect is not None:
            condition, witness = defect
            report.fail(AdaptedError(condition, witness, f"chart {format_label(label)}"), format_label(label))
        norm = _sampled_norm(atlas, label, section, zone, resolution)
        report.details[f"sup nu {format_label(label)}"] = norm
        if norm >= constants.sigma:
            report.fail(AdaptedError("e", format_label(label), f"sup ||nu|| = {norm:.6g} >= sigma = "
                                                                f"{constants.sigma:.6g}"), format_label(label))
        if chart.obs_dim and section.components and all(c == ZERO for c in section.components):
            report.details[f"nu {format_label(label)}"] = "0"
    return report.sampled()
