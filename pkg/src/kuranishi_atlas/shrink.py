"""
Shrinkings of weak atlases, the level-by-level taming construction and sampled
admissible metrics.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix

from kuranishi_atlas.atlas import (
    Atlas,
    build_quotient,
    subspace_preimage,
    validate_additivity,
    validate_cocycles,
    validate_tameness,
)
from kuranishi_atlas.chart import Label, label_of, restrict_chart, zero_locus
from kuranishi_atlas.config import default_resolution
from kuranishi_atlas.errors import (
    CoverError,
    FootprintError,
    LemmaHypothesisError,
    MetricError,
    NonAffineError,
    ShrinkError,
    TamingError,
    format_label,
)
from kuranishi_atlas.geometry import (
    HALF,
    Box,
    Domain,
    Interval,
    MetricSample,
    Number,
    as_fraction,
    cylinder_radius,
    log_domain,
)
from kuranishi_atlas.reduction import footprint_cover, lebesgue_number, round_down

Pair = Tuple[Label, Label]
LEMMA_HALVINGS = 20
LEMMA_CELLS = 8


def _empty_like(domain: Domain) -> Domain:
    return Domain.empty(domain.dim, domain.periodic)


def _intersection(domains: List[Domain]) -> Domain:
    result = domains[0]
    for domain in domains[1:]:
        result = result.intersection(domain)
    return result


def footprint_of(atlas: Atlas, label: Label, domain: Domain) -> Domain:
    """psi(U' ∩ s^{-1}(0)) for a new domain U' of chart ``label``."""
    chart = atlas.chart(label)
    zeros = zero_locus(chart.section, domain)
    if zeros.is_empty():
        return _empty_like(chart.footprint)
    try:
        boxes = chart.footprint_piece().image(zeros, chart.footprint.periodic)
    except NonAffineError as e:
        raise ShrinkError(f"footprint map of {format_label(label)} is not axis-affine") from e
    return _empty_like(chart.footprint).with_boxes(boxes)


def shrink(atlas: Atlas, new_domains: Dict[Label, Domain], name: Optional[str] = None) -> Atlas:
    """
    Shrinking of a weak additive atlas to the domains U'_I.

    The new footprints F'_I are read off the zero sets; they must satisfy
    F'_I = ∩ F'_i, still cover X, and stay nonempty wherever F_I was. Coordinate
    changes keep U'_IJ = U_IJ ∩ U'_I ∩ phi_IJ^{-1}(U'_J).

    :raises ShrinkError: when a footprint is lost or the shrunk cover breaks.
    """
    footprints: Dict[Label, Domain] = {}
    for label in atlas.labels:
        domain = new_domains.get(label, atlas.chart(label).domain)
        if not atlas.chart(label).domain.contains(domain):
            raise ShrinkError(f"U'_{format_label(label)} is not a subset of U_{format_label(label)}")
        if not domain.closure_within(atlas.chart(label).domain):
            logging.debug(f"U'_{format_label(label)} is not precompact in U_{format_label(label)}")
        footprints[label] = footprint_of(atlas, label, domain)
    for label in atlas.labels:
        if footprints[label].is_empty():
            raise ShrinkError(f"footprint F'_{format_label(label)} is empty", lost=label)
        expected = _intersection([footprints[label_of([i])] for i in sorted(label)])
        if not expected.same_set(footprints[label]):
            raise ShrinkError(f"F'_{format_label(label)} is not the intersection of the basic footprints",
                              lost=label)
    covered = Domain.union_of([footprints[label] for label in atlas.basic])
    missing = covered.find_outside(atlas.space)
    if missing is not None:
        raise ShrinkError(f"shrunk footprints miss the point {tuple(str(v) for v in missing)} of X")
    charts = {label: chart.restricted_to(new_domains.get(label, chart.domain), footprints[label])
              for label, chart in atlas.charts.items()}
    changes = {}
    for key, change in atlas.changes.items():
        source, target = key
        cut = change.restricted(charts[source].domain)
        changes[key] = cut.restricted(cut.preimage(charts[target].domain))
    shrunk = atlas.with_parts(charts, changes, name or f"{atlas.name}-shrunk")
    for report in (validate_cocycles(shrunk, "weak"), validate_additivity(shrunk)):
        if not report.passed:
            raise ShrinkError(f"shrinking of {atlas.name} breaks {report.name}: {report.violation}")
    logging.info(f"shrank {atlas.name} to {shrunk.name}")
    return shrunk


def shrink_footprints(atlas: Atlas, eps: Union[Fraction, Dict[int, Fraction]], name: Optional[str] = None) -> Atlas:
    """
    Shrink every basic footprint F_i by eps (one value, or one per basic index) and
    restrict each chart precompactly to F'_I = ∩ F'_i.

    :raises ShrinkError: when some F'_I is empty although F_I is not.
    """
    domains, _ = _shrunk_domains(atlas, eps)
    return shrink(atlas, domains, name)


def _shrunk_footprints(atlas: Atlas, eps) -> Dict[Label, Domain]:
    basic = {}
    for label in atlas.basic:
        (index,) = tuple(label)
        step = eps.get(index, Fraction(0)) if isinstance(eps, dict) else eps
        basic[index] = atlas.chart(label).footprint.shrink(as_fraction(step)) if step else atlas.chart(label).footprint
    footprints = {}
    for label in atlas.labels:
        shrunk = _intersection([basic[i] for i in sorted(label)])
        if shrunk.is_empty():
            raise ShrinkError(f"F'_{format_label(label)} is empty while F_{format_label(label)} is not", lost=label)
        footprints[label] = shrunk
    return footprints


def _shrunk_domains(atlas: Atlas, eps) -> Tuple[Dict[Label, Domain], Dict[Label, Domain]]:
    footprints = _shrunk_footprints(atlas, eps)
    domains = {}
    for label in atlas.labels:
        try:
            domains[label] = restrict_chart(atlas.chart(label), footprints[label], precompact=True).domain
        except FootprintError as e:
            raise ShrinkError(f"cannot restrict chart {format_label(label)}: {e}", lost=label) from e
    return domains, footprints


# the open sets lemma


def _same_distance(first: Number, second: Number) -> bool:
    if first == math.inf or second == math.inf:
        return first == second
    return abs(float(first) - float(second)) <= 1e-12


def _lemma_sets(index: int, outer: Domain, zeros: Domain, parts: Dict[int, Domain],
                targets: Dict[Label, Domain]) -> Tuple[Domain, List[Tuple[Domain, Domain]]]:
    guards = []
    for key, target in targets.items():
        if index in key:
            common = _intersection([parts[i] for i in sorted(key)])
            guards.append((zeros.difference(common), outer.difference(target)))
    return zeros.difference(parts[index]), guards


def _lemma_value(sets: Tuple[Domain, List[Tuple[Domain, Domain]]], point: Sequence) -> Number:
    rest, guards = sets
    own = rest.distance(point)
    best: Number = math.inf
    for away, outside in guards:
        if not _same_distance(own, away.distance(point)):
            continue
        gap = outside.distance(point)
        if gap != math.inf:
            best = min(best, round_down(gap))
    return best


def lemma_function(index: int, outer: Domain, zeros: Domain, parts: Dict[int, Domain],
                   targets: Dict[Label, Domain], point: Sequence) -> Number:
    """
    Lower bound for f_i(z) = min d(z, U' ∖ W_J) over the J ∋ i in ``targets`` with
    d(z, Z ∖ Z_i) = d(z, Z ∖ Z_J).

    Irrational distances are rounded down; math.inf when no J qualifies.
    """
    return _lemma_value(_lemma_sets(index, outer, zeros, parts, targets), point)


def _cells(box: Box, step: Fraction) -> List[Box]:
    """Overlapping sub-boxes of ``box`` covering it, about ``step`` wide along its open axes."""
    axes = []
    for iv in box.intervals:
        if iv.is_point or iv.full or iv.length <= step:
            axes.append([iv])
            continue
        count = math.ceil(iv.length / step)
        width = iv.length / count
        axes.append([Interval(max(iv.lo, iv.lo + (n - HALF) * width), min(iv.hi, iv.lo + (n + 1 + HALF) * width))
                     for n in range(count)])
    return [Box(tuple(combo)) for combo in itertools.product(*axes)]


def _corners(box: Box) -> List[Tuple[Fraction, ...]]:
    ends = [[iv.lo] if iv.is_point or iv.full else [iv.lo, iv.midpoint(), iv.hi] for iv in box.intervals]
    return list(itertools.product(*ends))


def _graded_cylinders(index: int, outer: Domain, zeros: Domain, parts: Dict[int, Domain],
                      targets: Dict[Label, Domain], step: Fraction) -> List[Tuple[Box, Number]]:
    """Cells of Z_i with a lower bound for f_i on each, from grid values less the cell radius."""
    sets = _lemma_sets(index, outer, zeros, parts, targets)
    graded = []
    for box in parts[index].boxes:
        longest = max((iv.length for iv in box.intervals if not iv.is_point and not iv.full), default=step)
        for cell in _cells(box, max(step, longest / LEMMA_CELLS)):
            values = [_lemma_value(sets, corner) for corner in _corners(cell)]
            spread = max((iv.length for iv in cell.intervals if not iv.full), default=Fraction(0))
            low = min(values)
            graded.append((cell, low - spread if low != math.inf else math.inf))
    return graded


def _thickened(graded: List[Tuple[Box, Number]], floor: Fraction, scale: Fraction, outer: Domain) -> Domain:
    boxes = []
    for cell, bound in graded:
        radius = floor if bound == math.inf or bound <= floor else as_fraction(bound)
        radius = radius * scale
        boxes.append(cell.dilate([radius if k in cell.point_axes() else 0 for k in range(cell.dim)], outer.periodic))
    return outer.with_boxes(boxes).intersection(outer)


def open_sets_lemma(outer: Domain, zeros: Domain, parts: Dict[int, Domain],
                    targets: Dict[Label, Domain], resolution=None) -> Dict[Label, Domain]:
    """
    Open sets U_K ⊆ W_K with U_K ∩ Z = Z_K and U_J ∩ U_K = U_{J∪K}.

    U_K is the intersection of the sets U_{f_i}, i in K, so the intersection
    identities hold exactly. U_{f_i} thickens Z_i cell by cell along its normal axes
    by a grid lower bound for f_i(z) = min d(z, U' ∖ W_J) over J ∋ i with
    d(z, Z ∖ Z_i) = d(z, Z ∖ Z_J). Near the ends of Z_i, where f_i tends to 0, the
    cells fall back to the common cylinder radius that fits Z_K into W_K. All radii
    are halved until both inclusions hold.

    :param outer: the precompact domain U'.
    :param zeros: the relatively closed set Z ⊆ U', a union of slices.
    :param parts: the relatively open Z_i ⊆ Z.
    :param targets: W_K for the index sets K that need a domain (by label).
    :param resolution: grid step for the values of f_i.
    :raises LemmaHypothesisError: when W_K ∩ Z != Z_K or no radius works.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    expected = {}
    for key, target in targets.items():
        expected[key] = _intersection([parts[i] for i in sorted(key)])
        if not target.intersection(zeros).same_set(expected[key]):
            raise LemmaHypothesisError(f"W_{format_label(key)} ∩ Z is not Z_{format_label(key)}")
    for index, part in parts.items():
        if not zeros.contains(part):
            raise LemmaHypothesisError(f"Z_{index} is not a subset of Z")
    floor = None
    for key, target in targets.items():
        for box in expected[key].boxes:
            found = cylinder_radius(box, box.point_axes(), target)
            if found is not None:
                floor = found if floor is None else min(floor, found)
    floor = HALF if floor is None else floor
    if floor <= 0:
        raise LemmaHypothesisError("Z_K touches the boundary of W_K")
    graded = {index: _graded_cylinders(index, outer, zeros, parts, targets, resolution) for index in parts}
    scale = Fraction(1)
    for _ in range(LEMMA_HALVINGS):
        sets = {index: _thickened(cells, floor, scale, outer) for index, cells in graded.items()}
        family = {key: _intersection([sets[i] for i in sorted(key)]) for key in targets}
        if all(targets[key].contains(family[key]) and family[key].intersection(zeros).same_set(expected[key])
               for key in targets):
            logging.debug(f"open sets lemma: radius scale {scale}")
            return family
        scale /= 2
    raise LemmaHypothesisError(f"no radius scale down to {scale} separates the sets Z_K")


# taming


@dataclass
class TamingState:
    """Domains U^(k)_IJ for I ⊆ J at one level of the taming iteration."""
    level: int
    domains: Dict[Pair, Domain]
    footprints: Dict[Label, Domain]
    notes: List[str] = field(default_factory=list)

    def domain(self, source: Label, target: Label, atlas: Atlas) -> Domain:
        found = self.domains.get((source, target))
        return found if found is not None else _empty_like(atlas.chart(source).domain)

    def snapshot(self) -> "TamingState":
        return TamingState(self.level, dict(self.domains), dict(self.footprints), list(self.notes))


def _slice(atlas: Atlas, lower: Label, upper: Label, region: Domain) -> Domain:
    """s_upper^{-1}(E_lower) ∩ region; the zero set for the empty index set."""
    chart = atlas.chart(upper)
    if not lower:
        return zero_locus(chart.section, region)
    if lower == upper:
        return region
    return subspace_preimage(chart, atlas.change(lower, upper).linear, region)


def _pull(atlas: Atlas, source: Label, target: Label, region: Domain) -> Domain:
    """phi_IJ^{-1}(region), with phi_II the identity."""
    if source == target:
        return region
    return atlas.change(source, target).preimage(region)


def _push(atlas: Atlas, source: Label, target: Label, region: Domain) -> Domain:
    if source == target:
        return region
    change = atlas.change(source, target)
    return change.image(region.intersection(change.domain))


def _between(atlas: Atlas, lower: Label, upper: Label) -> List[Label]:
    return [label for label in atlas.labels if lower <= label <= upper]


def _level_zero(atlas: Atlas, footprints: Dict[Label, Domain]) -> TamingState:
    domains: Dict[Pair, Domain] = {}
    for label in atlas.labels:
        try:
            domains[(label, label)] = restrict_chart(atlas.chart(label), footprints[label], precompact=True).domain
        except FootprintError as e:
            raise TamingError(0, f"precompact restriction of {format_label(label)}: {e}") from e
    for source in atlas.labels:
        for target in atlas.labels:
            if source < target:
                region = atlas.domain_of(source, target).intersection(domains[(source, source)])
                domains[(source, target)] = region.intersection(_pull(atlas, source, target, domains[(target, target)]))
    return TamingState(0, domains, footprints)


def check_level(atlas: Atlas, state: TamingState) -> None:
    """
    The level-k conditions: zero sets of U_IJ are psi_I^{-1}(F'_J), and both tameness
    families hold for |I| <= k.

    :raises TamingError: with the first failing condition and a witness.
    """
    k = state.level
    for (source, target), region in state.domains.items():
        chart = atlas.chart(source)
        zeros = zero_locus(chart.section, region)
        own = zero_locus(chart.section, state.domains[(source, source)])
        expected = own.intersection(chart.footprint_preimage(state.footprints[target]))
        if not zeros.same_set(expected):
            raise TamingError(k, f"zero set of U_{format_label(source)}{format_label(target)}",
                              zeros.find_outside(expected) or expected.find_outside(zeros))
    for source in atlas.labels:
        if len(source) > k:
            continue
        supersets = [label for label in atlas.labels if source <= label]
        for first, second in itertools.combinations_with_replacement(supersets, 2):
            left = state.domain(source, first, atlas).intersection(state.domain(source, second, atlas))
            right = state.domain(source, first | second, atlas)
            if not left.same_set(right):
                raise TamingError(k, f"tame1 for {format_label(source)} in {format_label(first)}, "
                                     f"{format_label(second)}", left.find_outside(right) or right.find_outside(left))
        for middle in supersets:
            if middle == source:
                continue
            for top in [label for label in supersets if middle <= label]:
                left = _push(atlas, source, middle, state.domain(source, top, atlas))
                right = _slice(atlas, source, middle, state.domain(middle, top, atlas))
                if not left.same_set(right):
                    raise TamingError(k, f"tame2 for {format_label(source)} ⊆ {format_label(middle)} ⊆ "
                                         f"{format_label(top)}", left.find_outside(right) or right.find_outside(left))


def _step_a(atlas: Atlas, state: TamingState, label: Label, indices: List[int], resolution: Fraction) -> None:
    k = state.level
    outer = state.domains[(label, label)]
    lower = [h for h in [frozenset()] + atlas.labels if h < label]
    zeros = Domain.empty(outer.dim, outer.periodic)
    for h in lower:
        zeros = zeros.union(_slice(atlas, h, label, outer))
    extra = [i for i in indices if i not in label and (label | {i}) in atlas.charts]
    if not extra:
        return
    parts = {i: state.domain(label, label | {i}, atlas).intersection(zeros) for i in extra}
    targets = {}
    for size in range(1, len(extra) + 1):
        for combo in itertools.combinations(extra, size):
            top = label | frozenset(combo)
            if top not in atlas.charts:
                targets[frozenset(combo)] = _empty_like(outer)
                continue
            region = outer
            for middle in _between(atlas, label, top):
                region = region.intersection(_pull(atlas, label, middle, state.domain(middle, top, atlas)))
                region = region.intersection(state.domain(label, middle, atlas))
            targets[frozenset(combo)] = region
    try:
        family = open_sets_lemma(outer, zeros, parts, targets, resolution)
    except LemmaHypothesisError as e:
        raise TamingError(k, f"open sets for {format_label(label)}: {e}") from e
    for combo, region in family.items():
        top = label | combo
        if top in atlas.charts:
            state.domains[(label, top)] = region


def _step_b(atlas: Atlas, state: TamingState) -> None:
    k = state.level
    for middle in atlas.labels:
        if len(middle) <= k:
            continue
        below = [label for label in atlas.labels if label < middle and len(label) == k]
        for top in [label for label in atlas.labels if middle <= label]:
            region = state.domains[(middle, top)]
            for source in below:
                slice_ = _slice(atlas, source, middle, region)
                image = _push(atlas, source, middle, state.domain(source, middle, atlas))
                stray = slice_.difference(image)
                if not stray.is_empty():
                    region = region.difference(stray)
            state.domains[(middle, top)] = region


def tame_shrink(atlas: Atlas, eps=None, resolution=None, transcript: Optional[List[TamingState]] = None) -> Atlas:
    """
    Tame shrinking of a weak additive atlas.

    Level 0 restricts every chart precompactly to shrunk footprints F'_I and sets
    U_IJ = U_IJ ∩ U_I ∩ phi_IJ^{-1}(U_J). Level k first rebuilds U_IK for |I| = k
    with the open sets lemma (step A), then removes s_J^{-1}(E_I) minus
    phi_IJ(U_IJ) from U_JK for |J| > k (step B). The result is re-validated.

    :param eps: footprint shrinking; defaults to a quarter of the Lebesgue number.
    :param transcript: receives a snapshot of every level when given.
    :raises TamingError: when a level condition or the final tameness check fails.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    for report in (validate_cocycles(atlas, "weak", resolution), validate_additivity(atlas)):
        if not report.passed:
            raise TamingError(0, f"input is not weak and additive: {report.violation}")
    if eps is None:
        try:
            eps = lebesgue_number(atlas.space, footprint_cover(atlas), resolution) / 4
        except CoverError as e:
            raise TamingError(0, f"footprint cover: {e}") from e
    eps = as_fraction(eps)
    footprints = None
    for _ in range(10):
        try:
            footprints = _shrunk_footprints(atlas, eps)
            break
        except ShrinkError:
            eps /= 2
    if footprints is None:
        raise TamingError(0, "no footprint shrinking keeps every F_I nonempty")
    state = _level_zero(atlas, footprints)
    check_level(atlas, state)
    if transcript is not None:
        transcript.append(state.snapshot())
    indices = sorted(i for label in atlas.basic for i in label)
    for k in range(1, atlas.max_order + 1):
        state.level = k
        for label in [label for label in atlas.labels if len(label) == k]:
            _step_a(atlas, state, label, indices, resolution)
        _step_b(atlas, state)
        check_level(atlas, state)
        if transcript is not None:
            transcript.append(state.snapshot())
        logging.info(f"tame_shrink level {k} complete")
    charts = {label: atlas.chart(label).restricted_to(state.domains[(label, label)], footprints[label])
              for label in atlas.labels}
    changes = {}
    for (source, target), change in atlas.changes.items():
        changes[(source, target)] = change.restricted(state.domain(source, target, atlas))
    tamed = atlas.with_parts(charts, changes, f"{atlas.name}-tame")
    for label in tamed.labels:
        log_domain(f"U'_{format_label(label)}", tamed.chart(label).domain)
    report = validate_tameness(tamed, resolution)
    if not report.passed:
        raise TamingError(atlas.max_order, f"result is not tame: {report.violation}",
                          getattr(report.violation, "witness", None))
    return tamed


@dataclass
class Shrinking:
    """A shrinking ``atlas`` of ``original``: domains U'_I ⋐ U_I on the same index sets."""
    original: Atlas
    atlas: Atlas

    def __post_init__(self):
        if self.original.labels != self.atlas.labels:
            raise ShrinkError("a shrinking keeps the index sets of the atlas")

    @property
    def domains(self) -> Dict[Label, Domain]:
        return {label: self.atlas.chart(label).domain for label in self.atlas.labels}

    def overlap(self, source: Label, target: Label) -> Domain:
        """U'_IJ = U'_I ∩ phi_IJ^{-1}(U'_J)."""
        return self.atlas.domain_of(source, target)

    def is_precompact(self) -> bool:
        return all(self.atlas.chart(label).domain.closure_within(self.original.chart(label).domain)
                   for label in self.atlas.labels)


def preshrunk(atlas: Atlas, resolution=None) -> Shrinking:
    """A tame shrinking of ``atlas`` and a tame shrinking of that, with half the footprint step."""
    first = tame_shrink(atlas, resolution=resolution)
    eps = lebesgue_number(first.space, footprint_cover(first), resolution) / 8
    second = tame_shrink(first, eps=eps, resolution=resolution)
    return Shrinking(first, second)


# metrics


def _euclidean(a: np.ndarray, b: np.ndarray, periodic) -> np.ndarray:
    diff = np.abs(a - b)
    for k, p in enumerate(periodic):
        if p:
            wrapped = np.mod(diff[:, k], 1.0)
            diff[:, k] = np.minimum(wrapped, 1.0 - wrapped)
    return np.sqrt((diff ** 2).sum(axis=1))


def _shrinks(atlas: Atlas, shrunk: Atlas) -> bool:
    try:
        return Shrinking(atlas, shrunk).is_precompact()
    except ShrinkError:
        return False


def sampled_metric(atlas: Atlas, preshrunk: Optional[Shrinking] = None, resolution=None) -> MetricSample:
    """
    Shortest-path metric on the sampled realization of a tame atlas.

    Neighbouring samples of one chart are joined with their Euclidean distance and
    the graph is collapsed onto the quotient classes. With ``preshrunk``, a shrinking
    of ``atlas``, only samples in the shrunk domains U'_I are joined, so the metric
    lives on the classes of the shrunk atlas inside the larger realization.

    The details record the ratio between the path metric and the chart metric on
    neighbour pairs, and the largest distortion of a coordinate change on sampled
    pairs.

    :raises MetricError: when the atlas is not tame or ``preshrunk`` is not a shrinking of it.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    tameness = validate_tameness(atlas, resolution)
    if not tameness.passed:
        raise MetricError(f"admissible metrics need a tame atlas: {tameness.violation}")
    shrunk = atlas if preshrunk is None else preshrunk.atlas
    if preshrunk is not None and not _shrinks(atlas, preshrunk.atlas):
        raise MetricError(f"{preshrunk.atlas.name} is not a precompact shrinking of {atlas.name}")
    quotient = build_quotient(atlas, resolution)
    radius = float(resolution) * 1.5
    rows, cols, weights = [], [], []
    local_pairs = {}
    for label in atlas.labels:
        cloud = quotient.clouds[label]
        base = cloud.base
        pairs = base.neighbour_pairs(radius)
        if preshrunk is not None and len(pairs):
            inside = shrunk.chart(label).domain.contains_points(base.points)
            pairs = pairs[inside[pairs[:, 0]] & inside[pairs[:, 1]]]
        if not len(pairs):
            continue
        lengths = _euclidean(base.points[pairs[:, 0]], base.points[pairs[:, 1]], base.domain.periodic)
        offset = quotient.offsets[label]
        rows.append(quotient.classes[offset + pairs[:, 0]])
        cols.append(quotient.classes[offset + pairs[:, 1]])
        weights.append(lengths)
        local_pairs[label] = (pairs, lengths)
    n = quotient.n_classes
    if rows:
        r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(weights)
        keep = r != c
        # coo_matrix would sum duplicate edges; keep the shortest
        graph = _min_weights(r[keep], c[keep], w[keep], n)
    else:
        graph = coo_matrix((n, n)).tocsr()
    metric = MetricSample(quotient, quotient.classes, graph)
    ratios = []
    for label, (pairs, lengths) in local_pairs.items():
        offset = quotient.offsets[label]
        step = max(1, len(pairs) // 200)
        for (a, b), length in zip(pairs[::step], lengths[::step]):
            if length > 0:
                ratios.append(metric.distance(offset + int(a), offset + int(b)) / length)
    finite = [r for r in ratios if math.isfinite(r)]
    if len(finite) < len(ratios):
        logging.warning(f"metric on {atlas.name}: {len(ratios) - len(finite)} sampled pairs are disconnected")
    metric.ratio_bounds = (min(finite), max(finite)) if finite else (1.0, 1.0)
    metric.isometry_defect = _isometry_defect(shrunk, quotient)
    logging.info(f"metric on {atlas.name}: ratios {metric.ratio_bounds}, isometry defect {metric.isometry_defect:.3g}")
    return metric


def _min_weights(rows: np.ndarray, cols: np.ndarray, weights: np.ndarray, n: int):
    best: Dict[Tuple[int, int], float] = {}
    for a, b, w in zip(rows.tolist(), cols.tolist(), weights.tolist()):
        key = (min(a, b), max(a, b))
        if key not in best or w < best[key]:
            best[key] = w
    if not best:
        return coo_matrix((n, n)).tocsr()
    keys = np.array(list(best.keys()))
    return coo_matrix((np.array(list(best.values())), (keys[:, 0], keys[:, 1])), shape=(n, n)).tocsr()


def _isometry_defect(atlas: Atlas, quotient) -> float:
    worst = 0.0
    for (source, target), change in atlas.changes.items():
        base = quotient.clouds[source].base
        inside = np.flatnonzero(change.domain.contains_points(base.points))
        if len(inside) < 2:
            continue
        points = base.points[inside]
        images = change.apply_array(points)
        first, second = points[:-1], points[1:]
        before = _euclidean(first, second, base.domain.periodic)
        after = _euclidean(images[:-1], images[1:], change.target_periodic)
        valid = ~np.isnan(after)
        if valid.any():
            worst = max(worst, float(np.max(np.abs(after[valid] - before[valid]))))
    return worst
