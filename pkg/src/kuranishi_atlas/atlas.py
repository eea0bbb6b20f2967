"""
Kuranishi atlases.

An Atlas holds a chart for every index set I with F_I nonempty and a coordinate
change for every pair I ⊊ J. The validators return CheckReports; the realization
|K| is never built as a space. Instead QuotientSample identifies samples along the
coordinate changes, and the diagnostics confirm every sampled finding with an
exact orbit computation before reporting it.
"""
import itertools
import logging
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from kuranishi_atlas.chart import (
    Chart,
    CoordChange,
    Label,
    box_image,
    box_preimage,
    check_index_condition,
    check_map_axioms,
    evaluate_closed,
    identity_change,
    label_of,
    solve_affine,
    zero_locus,
)
from kuranishi_atlas.config import MAP_TOLERANCE, default_resolution
from kuranishi_atlas.errors import (
    AdditivityViolation,
    CocycleViolation,
    CoverError,
    NonAffineError,
    SingularMapError,
    TamenessViolation,
    ZeroSetError,
    format_label,
)
from kuranishi_atlas.exterior import RationalMatrix
from kuranishi_atlas.geometry import HALF, Box, Domain, Interval, SampleCloud, as_fraction
from kuranishi_atlas.reports import CheckReport, merge_reports

RADII = tuple(Fraction(1, 2 ** k) for k in range(1, 11))
LEVELS = ("weak", "standard", "strong")
ORBIT_LIMIT = 512


def sort_key(label: Label) -> Tuple[int, Tuple[int, ...]]:
    return len(label), tuple(sorted(label))


@dataclass(frozen=True)
class Atlas:
    name: str
    dim: int
    space: Domain
    charts: Dict[Label, Chart]
    changes: Dict[Tuple[Label, Label], CoordChange]

    @property
    def labels(self) -> List[Label]:
        return sorted(self.charts, key=sort_key)

    @property
    def basic(self) -> List[Label]:
        return [label for label in self.labels if len(label) == 1]

    @property
    def max_order(self) -> int:
        return max(len(label) for label in self.charts)

    def chart(self, label) -> Chart:
        label = label_of(label)
        if label not in self.charts:
            raise ValueError(f"atlas {self.name} has no chart {format_label(label)}")
        return self.charts[label]

    def change(self, source, target) -> Optional[CoordChange]:
        source, target = label_of(source), label_of(target)
        if source == target:
            return identity_change(self.chart(source))
        return self.changes.get((source, target))

    def domain_of(self, source: Label, target: Label) -> Domain:
        """U_IJ, with U_II = U_I and U_IJ empty when J is not an index set."""
        chart = self.chart(source)
        if target not in self.charts or not source <= target:
            return Domain.empty(chart.domain.dim, chart.domain.periodic)
        change = self.change(source, target)
        return chart.domain if source == target else change.domain

    def pairs(self) -> List[Tuple[Label, Label]]:
        return [(i, j) for i in self.labels for j in self.labels if i < j]

    def triples(self) -> List[Tuple[Label, Label, Label]]:
        labels = self.labels
        return [(i, j, k) for i in labels for j in labels for k in labels if i < j < k]

    def outgoing(self, label: Label) -> List[CoordChange]:
        return [c for (i, _), c in self.changes.items() if i == label]

    def incoming(self, label: Label) -> List[CoordChange]:
        return [c for (_, j), c in self.changes.items() if j == label]

    def with_parts(self, charts=None, changes=None, name: Optional[str] = None) -> "Atlas":
        return replace(self, charts=self.charts if charts is None else charts,
                       changes=self.changes if changes is None else changes, name=name or self.name)

    def __str__(self) -> str:
        return f"atlas {self.name}: {len(self.charts)} charts, {len(self.changes)} changes, dimension {self.dim}"


def check_covering(atlas: Atlas) -> CheckReport:
    """Footprints cover X, F_I is the intersection of the basic footprints, and the transition data is complete."""
    report = CheckReport("covering")
    basic = atlas.basic
    union = Domain.union_of([atlas.chart(i).footprint for i in basic])
    missing = union.find_outside(atlas.space)
    if missing is not None:
        report.fail(CoverError("basic footprints do not cover X", missing), "X", missing)
    for label in atlas.labels:
        chart = atlas.chart(label)
        if chart.dim != atlas.dim:
            report.fail(CoverError(f"chart {format_label(label)} has dimension {chart.dim}, not {atlas.dim}"),
                        format_label(label))
        footprints = [atlas.chart(label_of([i])).footprint for i in sorted(label)]
        expected = footprints[0]
        for footprint in footprints[1:]:
            expected = expected.intersection(footprint)
        if not expected.same_set(chart.footprint):
            report.fail(CoverError(f"F_{format_label(label)} is not the intersection of its basic footprints"),
                        format_label(label))
    indices = sorted(i for label in basic for i in label)
    for size in range(2, len(indices) + 1):
        for combo in itertools.combinations(indices, size):
            label = label_of(combo)
            overlap = atlas.chart(label_of([combo[0]])).footprint
            for i in combo[1:]:
                overlap = overlap.intersection(atlas.chart(label_of([i])).footprint)
            if not overlap.is_empty() and label not in atlas.charts:
                report.fail(CoverError(f"F_{format_label(label)} is nonempty but there is no chart for it"),
                            format_label(label))
    for source, target in atlas.pairs():
        if (source, target) not in atlas.changes:
            report.fail(CoverError(f"missing coordinate change {format_label(source)}->{format_label(target)}"),
                        format_label(source | target))
    report.details["index_sets"] = len(atlas.charts)
    report.details["max_order"] = atlas.max_order
    return report


def validate_maps(atlas: Atlas, resolution=None, tolerance: float = MAP_TOLERANCE) -> CheckReport:
    reports = [check_map_axioms(change, atlas.chart(i), atlas.chart(j), resolution, tolerance)
               for (i, j), change in sorted(atlas.changes.items(), key=lambda kv: (sort_key(kv[0][0]), sort_key(kv[0][1])))]
    return merge_reports("maps", reports)


def validate_index(atlas: Atlas, resolution=None) -> CheckReport:
    reports = [check_index_condition(change, atlas.chart(i), atlas.chart(j), resolution=resolution)
               for (i, j), change in sorted(atlas.changes.items(), key=lambda kv: (sort_key(kv[0][0]), sort_key(kv[0][1])))]
    return merge_reports("index", reports)


def _periodic_deviation(a: np.ndarray, b: np.ndarray, periodic: Sequence[bool]) -> np.ndarray:
    diff = np.abs(a - b)
    for k, p in enumerate(periodic):
        if p:
            wrapped = np.mod(diff[:, k], 1.0)
            diff[:, k] = np.minimum(wrapped, 1.0 - wrapped)
    diff = np.nan_to_num(diff, nan=0.0)
    return diff.max(axis=1) if diff.shape[1] else np.zeros(len(diff))


def _composite_domain(first: CoordChange, second: CoordChange, resolution) -> Tuple[Optional[Domain], Optional[SampleCloud]]:
    """phi_IJ^{-1}(U_JK) exactly, or a cloud of it when phi_IJ is not affine."""
    if first.is_affine():
        return first.preimage(second.domain), None
    cloud = first.domain.sample(resolution)
    return None, cloud


def validate_cocycles(atlas: Atlas, level: str = "standard", resolution=None,
                      tolerance: float = MAP_TOLERANCE) -> CheckReport:
    """
    Cocycle condition on every triple I ⊊ J ⊊ K.

    weak: phi_JK o phi_IJ = phi_IK on phi_IJ^{-1}(U_JK) ∩ U_IK (sampled);
    standard: also phi_IJ^{-1}(U_JK) ⊆ U_IK; strong: the two domains are equal.
    The linear parts must satisfy phihat_JK phihat_IJ = phihat_IK exactly at every level.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {', '.join(LEVELS)}")
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    report = CheckReport(f"cocycle ({level})")
    triples = atlas.triples()
    report.details["triples"] = len(triples)
    for triple in triples:
        i, j, k = triple
        first, second, direct = atlas.change(i, j), atlas.change(j, k), atlas.change(i, k)
        if first is None or second is None or direct is None:
            continue
        if second.linear @ first.linear != direct.linear:
            report.fail(CocycleViolation(level, triple, "phihat"), "phihat")
            continue
        composite, cloud = _composite_domain(first, second, resolution)
        if composite is not None:
            overlap = composite.intersection(direct.domain)
            cloud = overlap.sample(resolution) if not overlap.is_empty() else None
            points = cloud.points if cloud is not None else np.zeros((0, first.source_dim))
        else:
            images = first.apply_array(cloud.points)
            keep = second.domain.contains_points(images) & direct.domain.contains_points(cloud.points)
            points = cloud.points[keep]
        if len(points):
            lhs = second.apply_array(first.apply_array(points))
            rhs = direct.apply_array(points)
            deviation = _periodic_deviation(lhs, rhs, direct.target_periodic)
            bad = np.flatnonzero(deviation > tolerance)
            if bad.size:
                witness = _exact_row(cloud, points, int(bad[0]))
                report.fail(CocycleViolation(level, triple, witness), "maps", witness)
                continue
        if level == "weak":
            continue
        if composite is None:
            images = first.apply_array(cloud.points)
            inside = second.domain.contains_points(images)
            stray = np.flatnonzero(inside & ~direct.domain.contains_points(cloud.points))
            if stray.size:
                witness = cloud.exact(int(stray[0]))
                report.fail(CocycleViolation(level, triple, witness), "domain", witness)
            continue
        outside = direct.domain.find_outside(composite)
        if outside is not None:
            report.fail(CocycleViolation(level, triple, outside), "domain", outside)
            continue
        if level == "strong":
            extra = composite.find_outside(direct.domain)
            if extra is not None:
                report.fail(CocycleViolation(level, triple, extra), "domain", extra)
    return report.sampled() if level == "weak" else report


def _exact_row(cloud: Optional[SampleCloud], points: np.ndarray, row: int):
    if cloud is not None and len(cloud.points) == len(points):
        return cloud.exact(row)
    return tuple(Fraction(float(v)).limit_denominator(2 ** 20) for v in points[row])


def intersection_ranks(atlas: Atlas) -> Dict[Label, int]:
    """Rank of the stacked linear parts [phihat_iI]_{i in I} for every index set."""
    ranks = {}
    for label in atlas.labels:
        blocks = [atlas.change(label_of([i]), label) for i in sorted(label)]
        if any(b is None for b in blocks):
            continue
        ranks[label] = RationalMatrix.hstack(*[b.linear for b in blocks]).rank()
    return ranks


def validate_additivity(atlas: Atlas) -> CheckReport:
    """E_I is the direct sum of the images phihat_iI(E_i), i in I."""
    report = CheckReport("additivity")
    for label in atlas.labels:
        blocks = [atlas.change(label_of([i]), label) for i in sorted(label)]
        if any(b is None for b in blocks):
            report.fail(AdditivityViolation(label, "missing coordinate change from a basic chart"),
                        format_label(label))
            continue
        stacked = RationalMatrix.hstack(*[b.linear for b in blocks])
        rank = stacked.rank()
        report.details[f"rank {format_label(label)}"] = rank
        if stacked.rows != stacked.cols or rank != stacked.rows:
            report.fail(AdditivityViolation(
                label, f"dim E_I = {stacked.rows}, basic dimensions sum to {stacked.cols}, rank {rank}"),
                format_label(label))
    return report


def subspace_preimage(chart: Chart, linear: RationalMatrix, region: Domain) -> Domain:
    """s^{-1}(image of ``linear``) inside ``region``, exactly."""
    complement = linear.transpose().nullspace()
    if complement.cols == 0:
        return region
    equations = chart.section.linear_combination(complement.transpose())
    return zero_locus(equations, region)


def _same_set_witness(left: Domain, right: Domain):
    witness = right.find_outside(left)
    if witness is None:
        witness = left.find_outside(right)
    return witness


def validate_tameness(atlas: Atlas, resolution=None) -> CheckReport:
    """
    The two families of domain identities

        U_IJ ∩ U_IK = U_I(J∪K)                      for I ⊆ J, K
        phi_IJ(U_IK) = U_JK ∩ s_J^{-1}(phihat_IJ(E_I))  for I ⊆ J ⊆ K

    checked with exact box arithmetic. A tame atlas must be additive, and passing
    both families implies the strong cocycle condition, which is re-checked.
    """
    report = CheckReport("tameness")
    additivity = validate_additivity(atlas)
    if not additivity.passed:
        report.fail(additivity.violation, "additivity")
        return report
    labels = atlas.labels
    skipped = 0
    for i in labels:
        supersets = [j for j in labels if i <= j]
        for j, k in itertools.combinations_with_replacement(supersets, 2):
            left = atlas.domain_of(i, j).intersection(atlas.domain_of(i, k))
            right = atlas.domain_of(i, j | k)
            if not left.same_set(right):
                witness = _same_set_witness(left, right)
                report.fail(TamenessViolation("tame1", (i, j, k), witness), "tame1", witness)
        for j in supersets:
            if j == i:
                continue
            change = atlas.change(i, j)
            if not change.is_affine():
                skipped += 1
                continue
            target = atlas.chart(j)
            for k in [k for k in labels if j <= k]:
                region = atlas.domain_of(i, k).intersection(change.domain)
                left = change.image(region)
                right = subspace_preimage(target, change.linear, atlas.domain_of(j, k))
                if not left.same_set(right):
                    witness = _same_set_witness(left, right)
                    report.fail(TamenessViolation("tame2", (i, j, k), witness), "tame2", witness)
    if skipped:
        logging.warning(f"tame2 skipped for {skipped} non-affine coordinate changes")
        report.details["tame2_skipped"] = skipped
    if report.passed:
        strong = validate_cocycles(atlas, "strong", resolution)
        report.details["strong_cocycle"] = strong.status
        if not strong.passed:
            report.fail(strong.violation, "strong cocycle")
    return report


# realization


class ObjectCloud:
    """Samples of a chart domain together with samples of its zero set."""

    def __init__(self, chart: Chart, resolution) -> None:
        self.periodic = chart.domain.periodic
        base = chart.domain.sample(resolution)
        self._parts: List[Tuple[SampleCloud, np.ndarray]] = [(base, np.arange(len(base)))]
        self._maps: List[np.ndarray] = [np.arange(len(base))]
        try:
            zeros = chart.zero_set()
        except ZeroSetError:
            logging.warning(f"zero set of {format_label(chart.label)} is not exact; it is not sampled separately")
            zeros = None
        offset = len(base)
        if zeros is not None and not zeros.is_empty() and not zeros.same_set(chart.domain):
            cloud = zeros.sample(resolution)
            hits = base.snap(cloud.points, 1e-12)
            keep = np.flatnonzero(hits < 0)
            position = hits.copy()
            position[keep] = offset + np.arange(len(keep))
            self._parts.append((cloud, keep))
            self._maps.append(position)
            offset += len(keep)
        self.points = np.concatenate([cloud.points[keep] for cloud, keep in self._parts], axis=0) \
            if offset else np.zeros((0, chart.domain.dim))
        self._starts = np.cumsum([0] + [len(keep) for _, keep in self._parts])

    @property
    def base(self) -> SampleCloud:
        """The lattice sample of the whole domain; its indices are the first objects."""
        return self._parts[0][0]

    def __len__(self) -> int:
        return len(self.points)

    def exact(self, index: int) -> Tuple[Fraction, ...]:
        part = int(np.searchsorted(self._starts, index, side="right") - 1)
        cloud, keep = self._parts[part]
        return cloud.exact(int(keep[index - self._starts[part]]))

    def snap(self, points: np.ndarray, radius: float) -> np.ndarray:
        """Nearest object within ``radius`` (L-infinity, periodic axes wrapped), or -1."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(points), -1, dtype=int)
        gap = np.full(len(points), np.inf)
        for (cloud, _), position in zip(self._parts, self._maps):
            local = cloud.snap(points, radius)
            hit = np.flatnonzero(local >= 0)
            if not hit.size:
                continue
            objects = position[local[hit]]
            distance = _periodic_deviation(points[hit], self.points[objects], self.periodic)
            better = distance < gap[hit]
            best[hit[better]] = objects[better]
            gap[hit[better]] = distance[better]
        return best


@dataclass
class QuotientSample:
    atlas: Atlas
    resolution: Fraction
    clouds: Dict[Label, ObjectCloud]
    offsets: Dict[Label, int]
    edges: np.ndarray
    classes: np.ndarray
    n_classes: int

    def objects(self, label: Label) -> range:
        return range(self.offsets[label], self.offsets[label] + len(self.clouds[label]))

    def locate(self, index: int) -> Tuple[Label, int]:
        for label in self.atlas.labels:
            if index in self.objects(label):
                return label, index - self.offsets[label]
        raise IndexError(index)

    def point(self, label: Label, local: int) -> Tuple[Fraction, ...]:
        return self.clouds[label].exact(local)

    def members(self, class_id: int) -> List[Tuple[Label, int]]:
        return [self.locate(int(i)) for i in np.flatnonzero(self.classes == class_id)]

    def same_class_pairs(self, label: Label) -> List[Tuple[int, int]]:
        """Pairs of distinct samples of one chart in the same class."""
        block = self.classes[self.offsets[label]:self.offsets[label] + len(self.clouds[label])]
        groups: Dict[int, List[int]] = {}
        for local, class_id in enumerate(block):
            groups.setdefault(int(class_id), []).append(local)
        return [(members[0], other) for members in groups.values() if len(members) > 1 for other in members[1:]]

    def summary(self) -> Dict[str, int]:
        return {"objects": int(len(self.classes)), "morphisms": int(len(self.edges)), "classes": int(self.n_classes)}


def build_quotient(atlas: Atlas, resolution=None) -> QuotientSample:
    """
    Sample every chart domain and identify (I, x) with (J, phi_IJ(x)) by snapping the
    image to the nearest sample of U_J within h/2; classes are the connected
    components of the resulting graph.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    radius = float(resolution) / 2 * (1 + 1e-9)
    clouds = {label: ObjectCloud(atlas.chart(label), resolution) for label in atlas.labels}
    offsets, total = {}, 0
    for label in atlas.labels:
        offsets[label] = total
        total += len(clouds[label])
    rows, cols = [], []
    for (source, target), change in atlas.changes.items():
        cloud = clouds[source]
        if not len(cloud):
            continue
        inside = np.flatnonzero(change.domain.contains_points(cloud.points))
        if not inside.size:
            continue
        images = change.apply_array(cloud.points[inside])
        valid = ~np.isnan(images).any(axis=1)
        hits = clouds[target].snap(images[valid], radius)
        matched = hits >= 0
        rows.append(offsets[source] + inside[valid][matched])
        cols.append(offsets[target] + hits[matched])
    edges = np.stack([np.concatenate(rows), np.concatenate(cols)], axis=1) if rows else np.zeros((0, 2), dtype=int)
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(total, total))
    n_classes, classes = connected_components(graph, directed=False)
    logging.info(f"quotient of {atlas.name}: {total} objects, {len(edges)} morphisms, {n_classes} classes")
    return QuotientSample(atlas, resolution, clouds, offsets, edges, classes, n_classes)


@dataclass(frozen=True)
class OrbitNode:
    label: Label
    point: Tuple[Fraction, ...]
    transport: Optional[RationalMatrix]
    parent: int


def _normalize(point: Sequence, periodic: Sequence[bool]) -> Tuple[Fraction, ...]:
    return tuple(as_fraction(v) % 1 if p else as_fraction(v) for v, p in zip(point, periodic))


def orbit(atlas: Atlas, label, point: Sequence, limit: int = ORBIT_LIMIT
          ) -> Tuple[List[OrbitNode], List[Tuple[int, RationalMatrix]]]:
    """
    Exact equivalence class of (label, point) under the coordinate changes and their inverses.

    Each node carries the transport of the fibre E_label at the start into its own
    fibre (None once a backward step leaves the image of phihat). A node reached
    twice with different transports is returned as a conflict (node index, transport).
    """
    label = label_of(label)
    chart = atlas.chart(label)
    start = _normalize(point, chart.domain.periodic)
    nodes = [OrbitNode(label, start, RationalMatrix.identity(chart.obs_dim), -1)]
    seen = {(label, start): 0}
    conflicts: List[Tuple[int, RationalMatrix]] = []
    queue = deque([0])
    while queue and len(nodes) < limit:
        current = queue.popleft()
        node = nodes[current]
        steps = []
        for change in atlas.outgoing(node.label):
            if change.domain.contains_point(node.point):
                transport = None if node.transport is None else change.linear @ node.transport
                steps.append((change.target, change.apply(node.point), transport))
        for change in atlas.incoming(node.label):
            try:
                source = change.inverse_point(node.point)
            except NonAffineError:
                continue
            if source is None:
                continue
            transport = None
            if node.transport is not None:
                try:
                    transport = change.linear.solve(node.transport)
                except SingularMapError:
                    transport = None
            steps.append((change.source, source, transport))
        for target, target_point, transport in steps:
            key = (target, tuple(target_point))
            if key in seen:
                known = nodes[seen[key]].transport
                if known is not None and transport is not None and known != transport:
                    conflicts.append((seen[key], transport))
                continue
            seen[key] = len(nodes)
            nodes.append(OrbitNode(target, tuple(target_point), transport, current))
            queue.append(len(nodes) - 1)
    return nodes, conflicts


def orbit_chain(nodes: List[OrbitNode], index: int) -> str:
    chain = []
    while index >= 0:
        node = nodes[index]
        chain.append(f"({format_label(node.label)}, {_show(node.point)})")
        index = node.parent
    return " ~ ".join(reversed(chain))


def _show(point: Sequence) -> str:
    return "(" + ", ".join(str(v) for v in point) + ")"


def equivalent(atlas: Atlas, first: Tuple[Label, Sequence], second: Tuple[Label, Sequence]) -> bool:
    label, point = label_of(second[0]), _normalize(second[1], atlas.chart(second[0]).domain.periodic)
    nodes, _ = orbit(atlas, first[0], first[1])
    return any(node.label == label and node.point == point for node in nodes)


def diagnose_injectivity(quotient: QuotientSample, limit: int = 20) -> CheckReport:
    """
    Pairs x != x' of one chart with (I, x) ~ (I, x').

    Candidates come from the sampled classes; each is confirmed by an exact orbit.
    """
    atlas = quotient.atlas
    report = CheckReport("injectivity")
    candidates = unconfirmed = 0
    for label in atlas.labels:
        pairs = quotient.same_class_pairs(label)
        candidates += len(pairs)
        orbits: Dict[Tuple, List[OrbitNode]] = {}
        for first, second in pairs[:limit]:
            x, y = quotient.point(label, first), quotient.point(label, second)
            if x == y:
                continue
            if x not in orbits:
                orbits[x] = orbit(atlas, label, x)[0]
            nodes = orbits[x]
            hit = next((n for n, node in enumerate(nodes) if node.label == label and node.point == y), None)
            if hit is None:
                unconfirmed += 1
                continue
            report.flag(format_label(label), (x, y), orbit_chain(nodes, hit))
    report.details["candidates"] = candidates
    report.details["unconfirmed"] = unconfirmed
    report.details["witnesses"] = len(report.witnesses)
    return report.sampled()


def _face_points(region: Box, periodic: Sequence[bool], resolution, cap: int) -> List[Tuple[Fraction, ...]]:
    points = []
    for k, iv in enumerate(region.intervals):
        if iv.full or iv.is_point:
            continue
        for end in (iv.lo, iv.hi):
            face = Domain(region.dim, (region.replace(k, Interval.point(end, periodic[k])),), tuple(periodic))
            cloud = face.sample(resolution)
            picks = sorted(set(np.linspace(0, len(cloud) - 1, min(cap, len(cloud))).astype(int)))
            points.extend(cloud.exact(int(i)) for i in picks)
    return points


def _push_inside(point: Sequence[Fraction], region: Box, periodic: Sequence[bool], radius: Fraction) -> Tuple:
    """A point of ``region`` within ``radius`` of a point of its closure, moving along the boundary axes only."""
    lifted, boundary = [], []
    for k, (v, iv, p) in enumerate(zip(point, region.intervals, periodic)):
        if iv.full or iv.is_point:
            lifted.append(v)
            continue
        value = v % 1 if p else v
        for s in ((0, 1, -1) if p else (0,)):
            if iv.lo <= value + s <= iv.hi:
                value = value + s
                break
        lifted.append(value)
        if value in (iv.lo, iv.hi):
            boundary.append(k)
    step = radius / max(1, len(boundary))
    for k in boundary:
        iv = region.intervals[k]
        move = min(step, (iv.hi - iv.lo) / 2)
        lifted[k] = iv.lo + move if lifted[k] == iv.lo else iv.hi - move
    return _normalize(lifted, periodic)


def diagnose_hausdorff(quotient: QuotientSample, radii: Sequence = RADII, cap: int = 16,
                       limit: int = 3) -> CheckReport:
    """
    Pairs of distinct classes without disjoint neighbourhoods.

    For charts I, J below a common K the transition g = phi_JK^{-1} o phi_IK is
    extended to the boundary of its domain D. A boundary point a of D in U_I with
    b = g(a) in U_J and (I, a) not equivalent to (J, b) is flagged when for every
    radius r there is a' in D within r of a whose partner g(a') lies in U_J.
    Affine changes only; others are counted as skipped.
    """
    atlas = quotient.atlas
    resolution = quotient.resolution
    report = CheckReport("hausdorff")
    seen = set()
    skipped = 0
    for top in atlas.labels:
        below = [label for label in atlas.labels if label <= top]
        for i, j in itertools.permutations(below, 2):
            first, second = atlas.change(i, top), atlas.change(j, top)
            if first is None or second is None:
                continue
            if not (first.is_affine() and second.is_affine()):
                skipped += 1
                continue
            flagged = 0
            for p1, p2 in itertools.product(first.pieces, second.pieces):
                maps1, maps2 = p1.maps(), p2.maps()
                per1, per2 = p1.domain.periodic, p2.domain.periodic
                for box1, box2 in itertools.product(p1.domain.boxes, p2.domain.boxes):
                    try:
                        shadow = box_image(box2, box2, maps2, per2, second.target_periodic)
                    except NonAffineError:
                        skipped += 1
                        continue
                    for region in box_preimage(box1, maps1, per1, first.target_periodic, shadow):
                        for a in _face_points(region, per1, resolution, cap):
                            if flagged >= limit or not atlas.chart(i).domain.contains_point(a):
                                continue
                            y = evaluate_closed(box1, maps1, per1, a)
                            b = solve_affine(box2, maps2, per2, second.target_periodic, y, closed=True)
                            if b is None or not atlas.chart(j).domain.contains_point(b):
                                continue
                            key = frozenset([(i, a), (j, b)])
                            if key in seen or equivalent(atlas, (i, a), (j, b)):
                                continue
                            seen.add(key)
                            witnesses = []
                            for r in radii:
                                a2 = _push_inside(a, region, per1, as_fraction(r))
                                b2 = solve_affine(box2, maps2, per2, second.target_periodic,
                                                  evaluate_closed(box1, maps1, per1, a2))
                                if b2 is None or not atlas.chart(j).domain.contains_point(b2):
                                    break
                                witnesses.append((r, a2, b2))
                            if len(witnesses) < len(radii):
                                continue
                            flagged += 1
                            note = "; ".join(f"r={r}: ({format_label(i)}, {_show(a2)}) ~ ({format_label(j)}, {_show(b2)})"
                                             for r, a2, b2 in witnesses)
                            report.flag(f"{format_label(i)}|{format_label(j)}", (a, b),
                                        f"[{format_label(i)}, {_show(a)}] != [{format_label(j)}, {_show(b)}]; {note}")
    report.details["suspected_pairs"] = len(report.witnesses)
    report.details["radii"] = len(radii)
    if skipped:
        report.details["skipped"] = skipped
        logging.warning(f"hausdorff: {skipped} non-affine combinations skipped")
    return report.sampled()


def fiber_structure(quotient: QuotientSample, label, point: Sequence) -> CheckReport:
    """
    Whether the obstruction fibre over the class of (label, point) is a vector space.

    The fibre E_label is transported along every chain of the exact orbit; a sample
    reached with two different transports exhibits a non-linear identification
    e ~ M e.
    """
    atlas = quotient.atlas
    label = label_of(label)
    nodes, conflicts = orbit(atlas, label, point)
    report = CheckReport(f"fiber {format_label(label)} {_show(point)}")
    maximal = max({node.label for node in nodes}, key=sort_key)
    report.details["class_size"] = len(nodes)
    report.details["maximal_label"] = format_label(maximal)
    report.details["fiber_dim"] = atlas.chart(maximal).obs_dim
    for index, transport in conflicts:
        node = nodes[index]
        report.flag(format_label(node.label), node.point,
                    f"fibre identifications e ~ {node.transport} e and e ~ {transport} e "
                    f"(chain {orbit_chain(nodes, index)})")
    report.details["linear"] = not conflicts
    return report


def eps_set(atlas: Atlas, source, region: Domain, target) -> Domain:
    """
    The points of U_J equivalent to points of S_I:
    phi_J(I∪J)^{-1}(phi_I(I∪J)(S_I)), empty when I∪J is not an index set.
    """
    source, target = label_of(source), label_of(target)
    union = source | target
    if source == target:
        return region.intersection(atlas.chart(source).domain)
    if union not in atlas.charts:
        chart = atlas.chart(target)
        return Domain.empty(chart.domain.dim, chart.domain.periodic)
    up = atlas.change(source, union)
    image = up.image(region.intersection(up.domain))
    return atlas.change(target, union).preimage(image)


def diagnose_metrizability(atlas: Atlas, base_label, plane_label, radii: Sequence = RADII, epsilon=HALF,
                           bound: Callable[[Fraction], Fraction] = lambda x: x) -> CheckReport:
    """
    Points within r of the class of the origin of ``base_label`` (in the plane
    coordinates of ``plane_label``) that lie outside the quotient-open set

        U_{f,eps} = {[x] : x in U_base, |x| < eps} ∪ {[(x, y)] : (x, y) in U_plane, |x| < eps, |y| < f(x)}.

    A witness for every radius shows the quotient topology at the origin is
    strictly finer than the subspace topology of the plane.
    """
    base_label, plane_label = label_of(base_label), label_of(plane_label)
    epsilon = as_fraction(epsilon)
    plane = atlas.chart(plane_label)
    report = CheckReport("metrizability")

    def in_open_set(point) -> bool:
        for node in orbit(atlas, plane_label, point)[0]:
            if node.label == base_label and abs(node.point[0]) < epsilon:
                return True
            if node.label == plane_label:
                x, y = node.point[0], node.point[1]
                if abs(x) < epsilon and abs(y) < bound(x):
                    return True
        return False

    found = 0
    for r in radii:
        r = as_fraction(r)
        for scale in (Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)):
            candidate = (r * scale, r * scale) + tuple(Fraction(0) for _ in range(plane.domain.dim - 2))
            if plane.domain.contains_point(candidate) and not in_open_set(candidate):
                report.flag(f"r={r}", candidate, f"within {r} of [0] but outside U_f,{epsilon}")
                found += 1
                break
    report.details["radii_with_witness"] = found
    return report
