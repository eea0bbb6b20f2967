"""
Cover reductions and reductions of tame atlases.

A cover reduction replaces the footprint cover F_1..F_N of X by regions Z_I that
are precompact in F_I, whose closures only meet for nested index sets, and that
still cover X. A reduction of an atlas is the analogous family V_I inside the chart
domains; the perturbation stage lives on it.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional

from kuranishi_atlas.atlas import Atlas, eps_set, orbit, sort_key, validate_tameness
from kuranishi_atlas.chart import Label, label_of, restrict_chart, zero_locus
from kuranishi_atlas.config import default_resolution
from kuranishi_atlas.errors import (
    CoverError,
    FootprintError,
    NonAffineError,
    ReductionError,
    ZeroSetError,
    format_label,
)
from kuranishi_atlas.geometry import Domain, Number, as_fraction
from kuranishi_atlas.reports import CheckReport

ROUNDING = 2 ** 20


def round_down(value: Number) -> Fraction:
    """A rational lower bound for ``value``."""
    if isinstance(value, Fraction):
        return value
    return Fraction(math.floor(float(value) * ROUNDING), ROUNDING)


def _intersection(domains: List[Domain]) -> Domain:
    result = domains[0]
    for domain in domains[1:]:
        result = result.intersection(domain)
    return result


def _union(domains: List[Domain], dim: int, periodic) -> Domain:
    result = Domain.empty(dim, periodic)
    for domain in domains:
        result = result.union(domain)
    return result


def _comparable(first: Label, second: Label) -> bool:
    return first <= second or second <= first


def _touching_point(first: Domain, second: Domain):
    """A point where the closures of two domains meet, from the first touching pair of boxes."""
    for a in first.boxes:
        for b in second.boxes:
            if a.closures_meet(b, first.periodic):
                return tuple(_closest(ia, ib) for ia, ib in zip(a.intervals, b.intervals))
    return None


def _closest(first, second) -> Fraction:
    if first.full:
        return second.midpoint() if not second.full else Fraction(0)
    if second.full:
        return first.midpoint()
    return (max(first.lo, second.lo) + min(first.hi, second.hi)) / 2


def lebesgue_number(space: Domain, cover: Dict, resolution=None) -> Fraction:
    """
    Certified lower bound for the Lebesgue number of ``cover``.

    At every sample x of X the reach max_i d(x, X minus F_i) is computed exactly; the
    reach is 1-Lipschitz, so the minimum over samples less the sample radius bounds
    the true infimum from below. When some region is all of X the answer is 1.

    :raises CoverError: when the bound is not positive at this resolution.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    complements = [space.difference(region) for region in cover.values()]
    if any(c.is_empty() for c in complements):
        return Fraction(1)
    cloud = space.sample(resolution)
    best: Number = math.inf
    for index in range(len(cloud)):
        x = cloud.exact(index)
        best = min(best, max(c.distance(x) for c in complements))
    slack = cloud.spacing * Fraction(math.isqrt(space.dim * ROUNDING ** 2) + 1, ROUNDING) / 2
    bound = round_down(best) - slack
    if bound <= 0:
        raise CoverError(f"no positive Lebesgue number at resolution {resolution}")
    logging.debug(f"Lebesgue number >= {bound}")
    return bound


@dataclass
class CoverReduction:
    space: Domain
    cover: Dict[int, Domain]
    regions: Dict[Label, Domain]
    step: Fraction

    def footprint(self, label: Label) -> Domain:
        return _intersection([self.cover[i] for i in sorted(label)])

    def nonempty(self) -> List[Label]:
        return sorted((label for label, region in self.regions.items() if not region.is_empty()), key=sort_key)

    def region(self, label: Label) -> Domain:
        found = self.regions.get(label)
        return found if found is not None else Domain.empty(self.space.dim, self.space.periodic)

    def verify(self) -> CheckReport:
        """The three cover-reduction axioms, with exact box arithmetic."""
        report = CheckReport("cover reduction")
        labels = self.nonempty()
        for label in labels:
            region = self.regions[label]
            if not region.closure_within(self.footprint(label)):
                report.fail(CoverError(f"Z_{format_label(label)} is not precompact in F_{format_label(label)}",
                                       self.footprint(label).find_outside(region)), format_label(label))
        for first, second in itertools.combinations(labels, 2):
            if _comparable(first, second):
                continue
            if self.regions[first].closures_meet(self.regions[second]):
                witness = _touching_point(self.regions[first], self.regions[second])
                report.fail(CoverError(f"closures of Z_{format_label(first)} and Z_{format_label(second)} meet",
                                       witness), f"{format_label(first)}|{format_label(second)}")
        union = _union([self.regions[label] for label in labels], self.space.dim, self.space.periodic)
        missing = union.find_outside(self.space)
        if missing is not None:
            report.fail(CoverError("the regions Z_I do not cover X", missing), "X", missing)
        report.details["regions"] = len(labels)
        report.details["step"] = self.step
        return report


def cover_reduce(space: Domain, cover: Dict[int, Domain], step=None, resolution=None) -> CoverReduction:
    """
    Cover reduction of ``cover`` from uniformly nested covers.

    With N sets, F_i^k = F_i shrunk by 2(N-k) steps and G_i^k by 2(N-k)+1 steps, so
    G_i^1 ⋐ F_i^1 ⋐ ... ⋐ G_i^N ⋐ F_i^N = F_i, and

        Z_I = (∩_{i in I} G_i^|I|) minus ∪_{j not in I} closure(F_j^|I|).

    :param space: X as a domain of the footprint space.
    :param cover: the footprints F_i by basic index.
    :param step: nesting step; defaults to a quarter of the Lebesgue number over N.
    :raises CoverError: when the cover misses a point of X or an axiom fails.
    """
    union = _union(list(cover.values()), space.dim, space.periodic)
    missing = union.find_outside(space)
    if missing is not None:
        raise CoverError("the sets do not cover X", missing)
    indices = sorted(cover)
    n = len(indices)
    if step is None:
        step = lebesgue_number(space, cover, resolution) / (4 * n)
    step = as_fraction(step)
    if step <= 0:
        raise ValueError("nesting step must be positive")
    outer = {(i, k): cover[i].shrink(2 * (n - k) * step) for i in indices for k in range(1, n + 1)}
    inner = {(i, k): cover[i].shrink((2 * (n - k) + 1) * step) for i in indices for k in range(1, n + 1)}
    regions: Dict[Label, Domain] = {}
    for size in range(1, n + 1):
        for combo in itertools.combinations(indices, size):
            region = _intersection([inner[(i, size)] for i in combo])
            for j in indices:
                if j not in combo and not region.is_empty():
                    region = region.difference(outer[(j, size)])
            regions[label_of(combo)] = region
    reduction = CoverReduction(space, dict(cover), regions, step)
    report = reduction.verify()
    report.raise_for_status()
    logging.info(f"cover reduction with step {step}: {len(reduction.nonempty())} nonempty regions")
    return reduction


def footprint_cover(atlas: Atlas) -> Dict[int, Domain]:
    return {min(label): atlas.chart(label).footprint for label in atlas.basic}


@dataclass
class AtlasReduction:
    domains: Dict[Label, Domain]
    cover: Optional[CoverReduction] = None
    parent: Optional["AtlasReduction"] = None

    def domain(self, label: Label) -> Optional[Domain]:
        return self.domains.get(label)

    def nonempty(self) -> List[Label]:
        return sorted((label for label, d in self.domains.items() if not d.is_empty()), key=sort_key)

    def precompact_in(self, other: "AtlasReduction") -> bool:
        """Whether every C_I is precompact in the matching V_I."""
        for label in self.nonempty():
            outer = other.domains.get(label)
            if outer is None or not self.domains[label].closure_within(outer):
                return False
        return True


def _margin(atlas: Atlas, domains: Dict[Label, Domain], labels, resolution: Fraction) -> Fraction:
    margin = resolution / 4
    for label in labels:
        clearance = atlas.chart(label).domain.clearance(domains[label])
        if clearance != math.inf:
            margin = min(margin, round_down(clearance) / 2)
    return margin


def _thicken(domain: Domain, radius: Fraction) -> Domain:
    return domain.dilate_axes([radius] * domain.dim)


def _removal(overlap: Domain, zeros: Domain, label: Label) -> Domain:
    distance = overlap.distance_to(zeros)
    if distance == 0:
        raise ReductionError(f"the overlap region in U_{format_label(label)} touches the zero set")
    radius = round_down(distance) / 2 if distance != math.inf else Fraction(1, 2)
    for _ in range(20):
        hood = overlap.epsilon_neighbourhood(radius)
        if not hood.closures_meet(zeros):
            return hood
        radius /= 2
    raise ReductionError(f"no neighbourhood of the overlap in U_{format_label(label)} avoids the zero set")


def atlas_reduce(atlas: Atlas, cover_red: Optional[CoverReduction] = None, resolution=None,
                 skip_removal: bool = False) -> AtlasReduction:
    """
    Reduction of a tame atlas over a cover reduction.

    W_I is the precompact restriction of K_I to the footprint Z_I, so W_I meets the
    zero set exactly in psi_I^{-1}(Z_I). For J not comparable with I, the region
    Y_IJ = closure(W_I) ∩ eps_I(closure W_J) is removed together with a neighbourhood
    of half its distance to the zero set: V_I = W_I minus N(Y_IJ).

    :param skip_removal: keep V_I = W_I (used to inject overlap faults).
    :raises ReductionError: when the atlas is not tame or an overlap touches the zero set.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    tameness = validate_tameness(atlas, resolution)
    if not tameness.passed:
        raise ReductionError(f"atlas {atlas.name} is not tame: {tameness.violation}") from tameness.violation
    if cover_red is None:
        cover_red = cover_reduce(atlas.space, footprint_cover(atlas), resolution=resolution)
    for label in cover_red.nonempty():
        if label not in atlas.charts:
            raise ReductionError(f"Z_{format_label(label)} is nonempty but there is no chart for it")
    restricted: Dict[Label, Domain] = {}
    for label in atlas.labels:
        chart = atlas.chart(label)
        region = cover_red.region(label)
        if region.is_empty():
            restricted[label] = Domain.empty(chart.domain.dim, chart.domain.periodic)
            continue
        try:
            restricted[label] = restrict_chart(chart, region, precompact=True).domain
        except FootprintError as e:
            raise ReductionError(f"cannot restrict chart {format_label(label)}: {e}") from e
    domains = dict(restricted)
    if not skip_removal:
        labels = [label for label in atlas.labels if not restricted[label].is_empty()]
        for label in labels:
            chart = atlas.chart(label)
            zeros = zero_locus(chart.section, restricted[label])
            hoods = []
            for other in labels:
                if _comparable(label, other) or (label | other) not in atlas.charts:
                    continue
                margin = _margin(atlas, restricted, (label, other), resolution)
                try:
                    overlap = eps_set(atlas, other, _thicken(restricted[other], margin), label)
                except NonAffineError as e:
                    raise ReductionError(f"eps set of {format_label(other)} in {format_label(label)} "
                                         f"needs axis-affine changes") from e
                overlap = overlap.intersection(_thicken(restricted[label], margin))
                if overlap.is_empty():
                    continue
                hoods.append(_removal(overlap, zeros, label))
            if hoods:
                domains[label] = restricted[label].difference(
                    _union(hoods, chart.domain.dim, chart.domain.periodic))
                logging.info(f"removed {len(hoods)} overlap neighbourhoods from V_{format_label(label)}")
    return AtlasReduction(domains, cover_red)


def validate_reduction(atlas: Atlas, reduction: AtlasReduction, resolution=None) -> CheckReport:
    """
    The reduction axioms: V_I ⋐ U_I meeting the zero set, closures of V_I and V_J
    only meet in |K| for nested I, J (exact through eps sets), and every zero-set
    sample of a basic chart is equivalent to a point of some V_L.
    """
    resolution = default_resolution() if resolution is None else as_fraction(resolution)
    report = CheckReport("reduction")
    labels = [label for label in reduction.nonempty() if label in atlas.charts]
    for label in labels:
        chart = atlas.chart(label)
        region = reduction.domains[label]
        if not region.closure_within(chart.domain):
            report.fail(ReductionError(f"V_{format_label(label)} is not precompact in U_{format_label(label)}"),
                        format_label(label), chart.domain.find_outside(region))
            continue
        try:
            zeros = zero_locus(chart.section, region)
        except ZeroSetError:
            logging.warning(f"zero set of {format_label(label)} is not exact; precompactness only")
            continue
        if zeros.is_empty():
            report.fail(ReductionError(f"V_{format_label(label)} misses the zero set"), format_label(label))
            continue
        if reduction.cover is not None:
            footprint = reduction.cover.region(label)
            expected = chart.zero_set().intersection(chart.footprint_preimage(footprint))
            if not zeros.same_set(expected):
                report.fail(ReductionError(f"V_{format_label(label)} ∩ s^-1(0) is not psi^-1(Z_{format_label(label)})"),
                            format_label(label), zeros.find_outside(expected) or expected.find_outside(zeros))
    skipped = 0
    for first, second in itertools.permutations(labels, 2):
        if _comparable(first, second):
            continue
        try:
            shadow = eps_set(atlas, second, reduction.domains[second], first)
        except NonAffineError:
            skipped += 1
            continue
        if reduction.domains[first].closures_meet(shadow):
            witness = _touching_point(reduction.domains[first], shadow)
            report.fail(ReductionError(f"closures of V_{format_label(first)} and V_{format_label(second)} "
                                       f"meet in the realization"), f"{format_label(first)}|{format_label(second)}",
                        witness)
    uncovered = 0
    for label in atlas.basic:
        chart = atlas.chart(label)
        try:
            cloud = chart.zero_set().sample(resolution)
        except ZeroSetError:
            skipped += 1
            continue
        for index in range(len(cloud)):
            point = cloud.exact(index)
            nodes, _ = orbit(atlas, label, point)
            if any(reduction.domains.get(node.label) is not None
                   and reduction.domains[node.label].contains_point(node.point) for node in nodes):
                continue
            uncovered += 1
            if uncovered <= 3:
                report.fail(ReductionError(f"zero ({format_label(label)}, {point}) is not covered by the reduction"),
                            format_label(label), point)
    report.details["index_sets"] = len(labels)
    if skipped:
        report.details["skipped"] = skipped
        return report.sampled()
    return report


def _empty(atlas: Atlas, label: Label) -> Domain:
    domain = atlas.chart(label).domain
    return Domain.empty(domain.dim, domain.periodic)


def nest_reduction(atlas: Atlas, reduction: AtlasReduction, resolution=None) -> AtlasReduction:
    """
    A reduction C with C_I ⋐ V_I.

    The footprint regions Z_I are shrunk by half the Lebesgue number of the cover
    they form, which keeps X covered, and C_I is the precompact restriction of
    K_I|V_I to the shrunk region.
    """
    if reduction.cover is None:
        raise ReductionError("nesting needs the footprint regions of the reduction")
    cover = reduction.cover
    live = {label: cover.regions[label] for label in cover.nonempty()}
    step = lebesgue_number(cover.space, live, resolution) / 2
    shrunk = {label: region.shrink(step) for label, region in cover.regions.items()}
    nested_cover = CoverReduction(cover.space, cover.cover, shrunk, step)
    check = nested_cover.verify()
    if not check.passed:
        raise ReductionError(f"shrinking the footprint regions by {step} broke the cover: {check.violation}")
    domains: Dict[Label, Domain] = {}
    for label in atlas.labels:
        outer = reduction.domains.get(label)
        region = shrunk.get(label)
        if outer is None or outer.is_empty() or region is None or region.is_empty():
            domains[label] = _empty(atlas, label)
            continue
        chart = atlas.chart(label).restricted_to(outer, cover.region(label))
        try:
            domains[label] = restrict_chart(chart, region, precompact=True).domain
        except FootprintError as e:
            raise ReductionError(f"cannot nest V_{format_label(label)}: {e}") from e
    logging.info(f"nested reduction with footprint step {step}")
    return AtlasReduction(domains, nested_cover, reduction)



ZERO_HOOD = Fraction(3, 4)


def renest(atlas: Atlas, nested: AtlasReduction) -> AtlasReduction:
    """
    A second reduction C' ⋐ C built from the zero sets of C alone.

    C'_I is the sup-metric r_I-neighbourhood of s_I^{-1}(0) ∩ C_I with r_I three
    quarters of the clearance of those zeros in C_I. The zero sets, and with them the
    footprints, are those of C, so (C, C') is a nested pair distinct from (V, C).
    """
    domains: Dict[Label, Domain] = {}
    for label in atlas.labels:
        region = nested.domains.get(label)
        if region is None or region.is_empty():
            domains[label] = _empty(atlas, label)
            continue
        zeros = zero_locus(atlas.chart(label).section, region)
        if zeros.is_empty():
            domains[label] = _empty(atlas, label)
            continue
        clearance = region.clearance(zeros)
        radius = ZERO_HOOD * round_down(clearance) if clearance != math.inf else Fraction(1, 2)
        if radius <= 0:
            raise ReductionError(f"the zeros of s_{format_label(label)} reach the boundary of C")
        domains[label] = zeros.epsilon_neighbourhood(radius, "sup").intersection(region)
    renested = AtlasReduction(domains, nested.cover, nested)
    if not renested.precompact_in(nested):
        raise ReductionError("the zero neighbourhoods are not precompact in C")
    logging.info(f"renested reduction on {len(renested.nonempty())} charts")
    return renested
