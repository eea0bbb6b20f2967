"""
Zeros of perturbed sections, their classes in the realization, and the signed count in dimension 0.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, root
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from kuranishi_atlas.atlas import Atlas, orbit, sort_key
from kuranishi_atlas.chart import Label
from kuranishi_atlas.config import ZERO_TOLERANCE, default_resolution
from kuranishi_atlas.errors import (
    CompactnessError,
    DimensionError,
    IndependenceFailure,
    NotTransverseError,
    OrientationTransportError,
    ZeroIsolationError,
    format_label,
)
from kuranishi_atlas.expr import ExprMap
from kuranishi_atlas.exterior import DetLineElement, RationalMatrix, transverse_zero_sign
from kuranishi_atlas.geometry import Domain, SampleCloud, as_fraction
from kuranishi_atlas.reports import CheckReport

if TYPE_CHECKING:
    from kuranishi_atlas.perturbation import Perturbation, PerturbationConstants
    from kuranishi_atlas.reduction import AtlasReduction

SNAP_GRID = 2 ** 30
BOX_BUDGET = 200_000
NEWTON_STEPS = 60
MIN_WIDTH_FACTOR = 8


def snap_rational(point: Sequence, grid: int = SNAP_GRID) -> Tuple[Fraction, ...]:
    """Nearest point of the grid 1/grid; exact coordinates pass through."""
    return tuple(v if isinstance(v, Fraction) else Fraction(round(float(v) * grid), grid) for v in point)


def _newton(section: ExprMap, start: np.ndarray, tolerance: float) -> Optional[np.ndarray]:
    x = np.array(start, dtype=float)
    value = section.evaluate_array(x[None, :])[0]
    for _ in range(NEWTON_STEPS):
        norm = float(np.max(np.abs(value))) if value.size else 0.0
        if norm < tolerance:
            return x
        jacobian = section.jacobian_array(x[None, :])[0]
        try:
            step = np.linalg.lstsq(jacobian, value, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        damping = 1.0
        while damping > 1e-4:
            trial = x - damping * step
            trial_value = section.evaluate_array(trial[None, :])[0]
            if float(np.max(np.abs(trial_value))) < norm:
                break
            damping /= 2
        else:
            return None
        x, value = trial, trial_value
    return x if float(np.max(np.abs(value))) < tolerance else None


def _corner_bound(section: ExprMap, lo: np.ndarray, hi: np.ndarray) -> float:
    center = (lo + hi) / 2
    corners = [center]
    for mask in range(2 ** min(len(lo), 4)):
        corners.append(np.where([(mask >> k) & 1 for k in range(len(lo))], hi, lo))
    jacobians = section.jacobian_array(np.array(corners))
    return float(np.max(np.sum(np.abs(jacobians), axis=2)))


def isolate_zeros(section: ExprMap, domain: Domain, resolution=None, tolerance: float = ZERO_TOLERANCE,
                  budget: int = BOX_BUDGET) -> np.ndarray:
    """
    Zeros of ``section`` in ``domain`` by box subdivision and damped Newton polishing.

    A box with centre c and half-width r is dropped when |f(c)| > 2 L r, L being the
    largest row sum of |Df| at its centre and corners. Boxes narrower than h/8 are
    polished; zeros closer than h/2 are merged.

    :raises ZeroIsolationError: when the box budget runs out, with the last box.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    if domain.is_empty():
        return np.zeros((0, section.in_dim))
    floor = float(resolution) / MIN_WIDTH_FACTOR
    stack = []
    for box in domain.boxes:
        lo = np.array([0.0 if iv.full else float(iv.lo) for iv in box.intervals])
        hi = np.array([1.0 if iv.full else float(iv.hi) for iv in box.intervals])
        stack.append((lo, hi))
    found: List[np.ndarray] = []
    visited = 0
    while stack:
        lo, hi = stack.pop()
        visited += 1
        if visited > budget:
            raise ZeroIsolationError(f"box budget {budget} exhausted", (tuple(lo), tuple(hi)))
        center = (lo + hi) / 2
        radius = float(np.max(hi - lo)) / 2
        value = section.evaluate_array(center[None, :])[0]
        if float(np.max(np.abs(value))) > 2 * _corner_bound(section, lo, hi) * radius:
            continue
        if 2 * radius > floor:
            axis = int(np.argmax(hi - lo))
            middle = center[axis]
            upper_lo, lower_hi = lo.copy(), hi.copy()
            upper_lo[axis] = middle
            lower_hi[axis] = middle
            stack.append((lo, lower_hi))
            stack.append((upper_lo, hi))
            continue
        polished = _newton(section, center, tolerance)
        if polished is not None and domain.contains_points(polished[None, :])[0]:
            found.append(polished)
    return _deduplicate(found, float(resolution) / 2, section.in_dim)


def _deduplicate(points: List[np.ndarray], radius: float, dim: int) -> np.ndarray:
    kept: List[np.ndarray] = []
    for point in points:
        if all(np.max(np.abs(point - other)) > radius for other in kept):
            kept.append(point)
    kept.sort(key=tuple)
    return np.array(kept) if kept else np.zeros((0, dim))


@dataclass
class ZeroPoint:
    label: Label
    point: Tuple[float, ...]
    exact: Tuple[Fraction, ...]
    jacobian: RationalMatrix
    residual: float
    sign: Optional[int] = None


def _zero_point(label: Label, section: ExprMap, point: np.ndarray) -> ZeroPoint:
    residual = float(np.max(np.abs(section.evaluate_array(point[None, :])[0])))
    jacobian = RationalMatrix.from_floats(section.jacobian_array(point[None, :])[0])
    return ZeroPoint(label, tuple(float(v) for v in point), snap_rational(point), jacobian, residual)


def find_zeros(atlas: Atlas, reduction: "AtlasReduction", nu: "Perturbation", resolution=None
               ) -> Dict[Label, List[ZeroPoint]]:
    """
    Zeros of s_I + nu_I on each V_I.

    :raises DimensionError: unless every chart has index dim U_I - dim E_I = 0.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    for label in atlas.labels:
        chart = atlas.chart(label)
        if chart.domain.dim != chart.obs_dim:
            raise DimensionError(f"chart {format_label(label)} has index {chart.domain.dim - chart.obs_dim}, "
                                 f"counts need index 0")
    zeros: Dict[Label, List[ZeroPoint]] = {}
    for label in reduction.nonempty():
        section = nu.perturbed(atlas, label)
        points = isolate_zeros(section, reduction.domains[label], resolution)
        zeros[label] = [_zero_point(label, section, point) for point in points]
        logging.info(f"{len(points)} zeros in chart {format_label(label)}")
    return zeros


@dataclass
class ZeroClass:
    index: int
    members: List[ZeroPoint]

    @property
    def representative(self) -> ZeroPoint:
        return min(self.members, key=lambda z: (sort_key(z.label), z.point))


def _in_footprints(atlas: Atlas, nested: "AtlasReduction", zero: ZeroPoint) -> bool:
    region = nested.domains.get(zero.label)
    if region is not None and region.contains_points(np.array([zero.point]))[0]:
        return True
    nodes, _ = orbit(atlas, zero.label, zero.exact)
    for node in nodes:
        region = nested.domains.get(node.label)
        if region is not None and region.contains_point(node.point):
            return True
    return False


def quotient_zeros(atlas: Atlas, zeros: Dict[Label, List[ZeroPoint]], resolution=None,
                   nu: Optional["Perturbation"] = None, nested: Optional["AtlasReduction"] = None
                   ) -> List[ZeroClass]:
    """
    Group zeros by z ~ phi_IJ(z), matching images within h/2. An image with no partner
    is polished against s_J + nu_J when ``nu`` is given. With ``nested`` every class must
    have a representative equivalent to a point of C.

    :raises CompactnessError: for a class outside C.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    radius = float(resolution) / 2
    labels = sorted(zeros, key=sort_key)
    nodes: List[ZeroPoint] = [z for label in labels for z in zeros[label]]
    position = {id(z): k for k, z in enumerate(nodes)}
    rows, cols = [], []
    for (source, target), change in sorted(atlas.changes.items(), key=lambda item: (sort_key(item[0][0]),
                                                                                     sort_key(item[0][1]))):
        if source not in zeros or target not in zeros:
            continue
        for zero in list(zeros[source]):
            if not change.domain.contains_points(np.array([zero.point]))[0]:
                continue
            image = change.apply_array(np.array([zero.point]))[0]
            partner = next((z for z in zeros[target] if np.max(np.abs(np.array(z.point) - image)) <= radius), None)
            if partner is None and nu is not None:
                section = nu.perturbed(atlas, target)
                polished = _newton(section, image, ZERO_TOLERANCE)
                if polished is not None and np.max(np.abs(polished - image)) <= radius:
                    logging.warning(f"re-polished the image of {format_label(source)} {zero.point} "
                                    f"in {format_label(target)}")
                    partner = _zero_point(target, section, polished)
                    zeros[target].append(partner)
                    position[id(partner)] = len(nodes)
                    nodes.append(partner)
            if partner is not None:
                rows.append(position[id(zero)])
                cols.append(position[id(partner)])
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
    count, assignment = connected_components(graph, directed=False) if nodes else (0, np.zeros(0, dtype=int))
    classes = [ZeroClass(k, [nodes[i] for i in np.flatnonzero(assignment == k)]) for k in range(count)]
    classes.sort(key=lambda c: (sort_key(c.representative.label), c.representative.point))
    for index, zero_class in enumerate(classes):
        zero_class.index = index
    if nested is not None:
        for zero_class in classes:
            if not any(_in_footprints(atlas, nested, z) for z in zero_class.members):
                z = zero_class.representative
                raise CompactnessError(f"zero class {zero_class.index} lies outside C", (format_label(z.label), z.point))
    logging.info(f"{len(nodes)} zeros in {len(classes)} classes")
    return classes


def reversed_orientation(atlas: Atlas) -> Dict[Label, DetLineElement]:
    """The opposite of the standard orientation on every chart."""
    result = {}
    for label in atlas.labels:
        chart = atlas.chart(label)
        result[label] = DetLineElement(RationalMatrix.identity(chart.domain.dim), RationalMatrix.identity(chart.obs_dim),
                                       Fraction(-1), "reversed standard bases")
    return result


def _orientation_sign(element: Optional[DetLineElement], dim: int) -> int:
    """Sign of ``element`` against the standard orientation of a square chart."""
    if element is None:
        return 1
    return int(transverse_zero_sign(RationalMatrix.identity(dim), element))


def orientation_transport(atlas: Atlas, orientation: Optional[Dict[Label, DetLineElement]] = None,
                          resolution=None) -> CheckReport:
    """
    Sampled compatibility of the orientations: at x in U_IJ where ds_I(x) and
    ds_J(phi_IJ(x)) are invertible, both charts must give the same sign.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    orientation = orientation or {}
    report = CheckReport("orientation")
    for (source, target), change in atlas.changes.items():
        first, second = atlas.chart(source), atlas.chart(target)
        if first.domain.dim != first.obs_dim or second.domain.dim != second.obs_dim:
            report.skip("orientation transport is checked for index 0 only")
            return report
        cloud = SampleCloud(change.domain, resolution)
        points = cloud.points[:: max(1, len(cloud.points) // 256)]
        if not len(points):
            continue
        images = change.apply_array(points)
        near = np.linalg.det(first.section.jacobian_array(points))
        far = np.linalg.det(second.section.jacobian_array(images))
        own = _orientation_sign(orientation.get(source), first.obs_dim)
        other = _orientation_sign(orientation.get(target), second.obs_dim)
        usable = (np.abs(near) > 1e-9) & (np.abs(far) > 1e-9)
        bad = np.flatnonzero(usable & (own * np.sign(near) != other * np.sign(far)))
        if bad.size:
            report.fail(OrientationTransportError(f"{format_label(source)} -> {format_label(target)} reverses "
                                                  f"orientation at {tuple(points[bad[0]])}"),
                        format_label(source), tuple(points[bad[0]]))
    return report.sampled()


@dataclass
class SignedCount:
    classes: List[ZeroClass]
    signs: List[int]
    total: int
    details: Dict[str, str] = field(default_factory=dict)

    def rows(self) -> List[List[str]]:
        rows = []
        for zero_class, sign in zip(self.classes, self.signs):
            z = zero_class.representative
            rows.append([str(zero_class.index), format_label(z.label), " ".join(f"{v:.12g}" for v in z.point),
                         "+1" if sign > 0 else "-1"])
        return rows

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["class", "chart", "coordinates", "sign"])
        writer.writerows(self.rows())
        return buffer.getvalue()

    def report(self) -> str:
        lines = [f"signed count: {self.total:+d} over {len(self.classes)} classes"]
        for row in self.rows():
            lines.append(f"  class {row[0]} chart {row[1]} at ({row[2]}): {row[3]}")
        for key, value in self.details.items():
            lines.append(f"  {key}: {value}")
        return "\n".join(lines)


def signed_count(atlas: Atlas, classes: List[ZeroClass],
                 orientation: Optional[Dict[Label, DetLineElement]] = None) -> SignedCount:
    """
    Sign every class by transverse_zero_sign at each of its representatives.

    :raises OrientationTransportError: when representatives of one class disagree.
    :raises NotTransverseError: at a degenerate zero.
    """
    orientation = orientation or {}
    signs = []
    for zero_class in classes:
        seen = set()
        for zero in zero_class.members:
            try:
                zero.sign = int(transverse_zero_sign(zero.jacobian, orientation.get(zero.label)))
            except NotTransverseError as e:
                raise NotTransverseError(f"zero {zero.point} of {format_label(zero.label)} is degenerate") from e
            seen.add(zero.sign)
        if len(seen) > 1:
            raise OrientationTransportError(f"class {zero_class.index} has representatives of both signs")
        signs.append(seen.pop())
    total = sum(signs)
    logging.info(f"signed count {total:+d}")
    return SignedCount(classes, signs, total)


def count_zeros(atlas: Atlas, reduction: "AtlasReduction", nested: "AtlasReduction", nu: "Perturbation",
                resolution=None, orientation: Optional[Dict[Label, DetLineElement]] = None) -> SignedCount:
    zeros = find_zeros(atlas, reduction, nu, resolution)
    classes = quotient_zeros(atlas, zeros, resolution, nu=nu, nested=nested)
    result = signed_count(atlas, classes, orientation)
    result.details["seed"] = str(nu.seed)
    return result


def independence_test(atlas: Atlas, reduction: "AtlasReduction", nested: "AtlasReduction",
                      constants: "PerturbationConstants", seeds: Sequence[int], resolution=None,
                      orientation: Optional[Dict[Label, DetLineElement]] = None,
                      alternatives: Sequence[Tuple["AtlasReduction", "AtlasReduction", "PerturbationConstants"]] = ()
                      ) -> CheckReport:
    """
    Build adapted perturbations for every seed (and every alternative reduction) and
    compare the signed counts.

    :raises IndependenceFailure: when two totals differ.
    """
    from kuranishi_atlas.perturbation import construct_adapted

    runs = [(reduction, nested, constants)] + list(alternatives)
    report = CheckReport("independence")
    totals: Dict[str, int] = {}
    for index, (first, second, consts) in enumerate(runs):
        for seed in seeds:
            nu = construct_adapted(atlas, first, second, consts, seed=seed, resolution=resolution)
            count = count_zeros(atlas, first, second, nu, resolution or consts.resolution, orientation)
            key = f"reduction {index} seed {seed}"
            totals[key] = count.total
            report.details[key] = f"{count.total:+d} ({len(count.classes)} classes)"
    values = set(totals.values())
    if len(values) > 1:
        raise IndependenceFailure(f"signed counts differ: {totals}")
    report.details["total"] = f"{values.pop():+d}" if values else "none"
    logging.info(f"independence: all {len(totals)} totals equal")
    return report


def _numerical_jacobian(section: ExprMap, point: np.ndarray, step: float = 1e-6) -> np.ndarray:
    columns = []
    for axis in range(len(point)):
        offset = np.zeros(len(point))
        offset[axis] = step
        ahead = section.evaluate_array((point + offset)[None, :])[0]
        behind = section.evaluate_array((point - offset)[None, :])[0]
        columns.append((ahead - behind) / (2 * step))
    return np.stack(columns, axis=1)


def _scalar(section: ExprMap):
    return lambda t: float(section.evaluate_array(np.array([[t]]))[0, 0])


def derivative_sign_oracle(section: ExprMap, domain: Domain, resolution=None) -> int:
    """
    Degree of a single-chart section by an independent sweep: sign changes on a fine
    lattice bracketed with brentq in one dimension, scipy root from every lattice
    point with a small value otherwise, signed by finite-difference determinants.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    if section.in_dim != section.out_dim:
        raise DimensionError("the sign oracle needs a square section")
    fine = resolution / 16
    found: List[np.ndarray] = []
    for box in domain.boxes:
        cloud = SampleCloud(Domain(domain.dim, (box,), domain.periodic), fine)
        points = cloud.points
        if section.in_dim == 1:
            points = points[np.argsort(points[:, 0])]
            values = section.evaluate_array(points)[:, 0]
            for k in range(len(points) - 1):
                a, b = points[k, 0], points[k + 1, 0]
                if values[k] == 0:
                    found.append(np.array([a]))
                elif values[k] * values[k + 1] < 0:
                    found.append(np.array([brentq(_scalar(section), a, b)]))
            continue
        values = np.max(np.abs(section.evaluate_array(points)), axis=1)
        threshold = float(fine) * max(1.0, float(np.max(np.sum(np.abs(section.jacobian_array(points)), axis=2))))
        for start in points[values < threshold]:
            result = root(lambda x: section.evaluate_array(x[None, :])[0], start, method="hybr")
            if result.success and domain.contains_points(result.x[None, :])[0]:
                found.append(result.x)
    total = 0
    for point in _deduplicate(found, float(resolution) / 4, section.in_dim):
        determinant = float(np.linalg.det(_numerical_jacobian(section, point)))
        if not math.isfinite(determinant) or determinant == 0:
            raise NotTransverseError(f"degenerate zero near {tuple(point)}")
        total += 1 if determinant > 0 else -1
    return total


def zero_curve(section: ExprMap, domain: Domain, resolution=None) -> np.ndarray:
    """
    Points of a one-dimensional zero set (index 1) as a polyline: lattice samples near
    the zero set projected by Newton and ordered by nearest neighbour. No count is
    attached to it.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    if section.in_dim - section.out_dim != 1:
        raise DimensionError("zero_curve needs index 1")
    cloud = SampleCloud(domain, resolution)
    if not len(cloud.points):
        return np.zeros((0, section.in_dim))
    values = np.max(np.abs(section.evaluate_array(cloud.points)), axis=1)
    slack = float(resolution) * float(np.max(np.sum(np.abs(section.jacobian_array(cloud.points)), axis=2)))
    projected = [p for p in (_newton(section, start, ZERO_TOLERANCE) for start in cloud.points[values <= slack])
                 if p is not None and domain.contains_points(p[None, :])[0]]
    points = list(_deduplicate(projected, float(resolution) / 4, section.in_dim))
    if not points:
        return np.zeros((0, section.in_dim))
    ordered = [points.pop(0)]
    while points:
        gaps = [float(np.max(np.abs(p - ordered[-1]))) for p in points]
        ordered.append(points.pop(int(np.argmin(gaps))))
    return np.array(ordered)
