"""
Shipped atlases and the demos that run on them.

The circle atlases cover S^1 = R/Z by three arcs F_i = (i/3, (i+2)/3) whose triple
intersection is empty. The counterexamples build on them: a third chart whose
domain wraps around the circle breaks injectivity of U_3 -> |K|, an extra chart
with a twisted obstruction map breaks linearity of the fibres, a staircase domain
breaks the Hausdorff property and an embedding of a line into a half plane breaks
metrizability. The zero-* atlases have virtual dimension 0 and ship with the
reductions V and C used by the perturbation pipeline.
"""
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from kuranishi_atlas.atlas import (
    RADII,
    Atlas,
    build_quotient,
    check_covering,
    diagnose_hausdorff,
    diagnose_injectivity,
    diagnose_metrizability,
    equivalent,
    fiber_structure,
    validate_additivity,
    validate_cocycles,
    validate_index,
    validate_maps,
    validate_tameness,
)
from kuranishi_atlas.atlas_file import AtlasFile
from kuranishi_atlas.chart import ChangePiece, Chart, CoordChange, Label, identity_change, label_of
from kuranishi_atlas.config import RunConfig, default_resolution
from kuranishi_atlas.errors import KuranishiError, format_label
from kuranishi_atlas.expr import ExprMap
from kuranishi_atlas.exterior import RationalMatrix
from kuranishi_atlas.geometry import Box, Domain, Interval
from kuranishi_atlas.perturbation import compute_constants, second_reduction
from kuranishi_atlas.reduction import AtlasReduction
from kuranishi_atlas.reports import CheckReport, all_passed
from kuranishi_atlas.zeroset_vfc import derivative_sign_oracle, independence_test

CIRCLE = (True,)
CYLINDER = (True, False)
PLANE = (False, False)

INJECTIVITY_WITNESSES = ((Fraction(7, 8), Fraction(3, 4)), (Fraction(15, 8), Fraction(3, 4)))


# building blocks


def arc(lo, hi) -> Domain:
    return Domain.from_bounds([(Fraction(lo), Fraction(hi))], CIRCLE)


def boxes(periodic: Sequence[bool], *bounds) -> Domain:
    """Union of the single-box domains given by ``bounds``."""
    return Domain.union_of([Domain.from_bounds(b, periodic) for b in bounds])


def points(*values) -> Domain:
    return Domain.empty(1).with_boxes(Box((Interval.point(Fraction(v)),)) for v in values)


def strip(footprint: Domain, *axes: Tuple) -> Domain:
    """footprint x (lo_1, hi_1) x ... as a domain whose first axes are the footprint's."""
    extra = tuple(Interval.make(Fraction(lo), Fraction(hi)) for lo, hi in axes)
    periodic = footprint.periodic + (False,) * len(axes)
    return Domain.empty(footprint.dim + len(axes), periodic).with_boxes(
        Box(box.intervals + extra) for box in footprint.boxes)


def exprs(dim: int, *texts: str) -> ExprMap:
    return ExprMap.parse(texts, dim)


def matrix(*rows: Sequence) -> RationalMatrix:
    return RationalMatrix.from_rows(rows)


def change(source: Chart, target: Chart, pieces: Sequence[Tuple[Domain, ExprMap]],
           linear: RationalMatrix) -> CoordChange:
    return CoordChange(source.label, target.label, tuple(ChangePiece(d, m) for d, m in pieces), linear,
                       target.domain.periodic)


def _footprints(arcs: Dict[int, Domain], labels: Sequence[Label]) -> Dict[Label, Domain]:
    result = {}
    for label in labels:
        indices = sorted(label)
        footprint = arcs[indices[0]]
        for i in indices[1:]:
            footprint = footprint.intersection(arcs[i])
        result[label] = footprint
    return result


def _circle_arcs() -> Dict[int, Domain]:
    return {i: arc(Fraction(i, 3), Fraction(i + 2, 3)) for i in (1, 2, 3)}


def _bundle(name: str, dim: int, space: Domain, charts: Sequence[Chart], changes: Sequence[CoordChange],
            reductions: Optional[Dict[str, Dict[Label, Domain]]] = None, seed: Optional[int] = None) -> AtlasFile:
    atlas = Atlas(name, dim, space, {c.label: c for c in charts}, {(c.source, c.target): c for c in changes})
    named = {key: AtlasReduction(domains) for key, domains in (reductions or {}).items()}
    return AtlasFile(atlas, named, seed=seed)


# circle atlases


def circle_basic() -> AtlasFile:
    """Restrictions of the global chart (S^1 x R, R, x2, x1); tame but not additive."""
    arcs = _circle_arcs()
    labels = [label_of(i) for i in ([1], [2], [3], [1, 2], [1, 3], [2, 3])]
    footprints = _footprints(arcs, labels)
    charts = {label: Chart(label, strip(footprints[label], (-1, 1)), 1, exprs(2, "x2"), exprs(2, "x1"),
                           footprints[label]) for label in labels}
    changes = [identity_change(charts[i], charts[j]) for i in labels for j in labels if i < j]
    return _bundle("circle-basic", 1, Domain.from_bounds([None], CIRCLE), list(charts.values()), changes)


def additive_circle(name: str, arcs: Dict[int, Domain], scales: Optional[Dict[Tuple[int, int], Fraction]] = None,
                    reach: Optional[Dict[Tuple[int, int], Fraction]] = None) -> AtlasFile:
    """
    Additive atlas over arcs without triple intersections: E_i = R, E_ij = R^2 with
    E_i and E_j embedded as the coordinate axes. The change i -> ij is
    x -> (x1, a x2, 0) (or (x1, 0, a x2) for the larger index) on F_ij x (-r/a, r/a);
    r < 1 leaves U_ij with points of s_ij^{-1}(E_i) outside the image, so the atlas is
    only weak.
    """
    scales, reach = scales or {}, reach or {}
    basic = [label_of([i]) for i in sorted(arcs)]
    pairs = []
    for i in sorted(arcs):
        for j in sorted(arcs):
            if i < j and not arcs[i].intersection(arcs[j]).is_empty():
                pairs.append(label_of([i, j]))
    footprints = _footprints(arcs, basic + pairs)
    charts = {label: Chart(label, strip(footprints[label], (-1, 1)), 1, exprs(2, "x2"), exprs(2, "x1"),
                           footprints[label]) for label in basic}
    for label in pairs:
        charts[label] = Chart(label, strip(footprints[label], (-1, 1), (-1, 1)), 2, exprs(3, "x2", "x3"),
                              exprs(3, "x1"), footprints[label])
    changes = []
    for label in pairs:
        i, j = sorted(label)
        for slot, k in enumerate((i, j)):
            a = Fraction(scales.get((k, slot), 1))
            r = Fraction(reach.get((k, slot), 1))
            coords = ["x1", "0", "0"]
            coords[1 + slot] = "x2" if a == 1 else f"{a}*x2"
            column = [[a], [0]] if slot == 0 else [[0], [a]]
            domain = strip(footprints[label], (-r / a, r / a))
            changes.append(change(charts[label_of([k])], charts[label], [(domain, exprs(2, *coords))],
                                  matrix(*column)))
    return _bundle(name, 1, Domain.from_bounds([None], CIRCLE), list(charts.values()), changes)


def circle_additive() -> AtlasFile:
    return additive_circle("circle-additive", _circle_arcs())


def random_additive_atlas(seed: int, max_charts: int = 3) -> AtlasFile:
    """
    A weak additive atlas on S^1 with 2..max_charts arcs, random cut points on the
    1/16 grid, random scales a in {1, 3/2, 2} and random reaches r in {1/2, 3/4, 1}.
    """
    rng = np.random.default_rng(seed)
    count = int(rng.integers(2, max_charts + 1))
    while True:
        cuts = sorted(Fraction(int(v), 16) for v in rng.choice(16, size=count, replace=False))
        gaps = [b - a for a, b in zip(cuts, cuts[1:] + [cuts[0] + 1])]
        if min(gaps) >= Fraction(1, 8):
            break
    margin = min(gaps) / 4
    arcs = {k + 1: arc(cuts[k] - margin, cuts[k] + gaps[k] + margin) for k in range(count)}
    choices = [Fraction(1), Fraction(3, 2), Fraction(2)]
    reaches = [Fraction(1, 2), Fraction(3, 4), Fraction(1)]
    scales = {(k, slot): choices[int(rng.integers(3))] for k in arcs for slot in (0, 1)}
    reach = {(k, slot): reaches[int(rng.integers(3))] for k in arcs for slot in (0, 1)}
    return additive_circle(f"random-additive-{seed}", arcs, scales, reach)


# counterexamples


def _wrapped_charts(obs_dim: int) -> Dict[Label, Chart]:
    """
    Charts 1, 2, 3, 12, 13, 23 with U_3 ⊂ (0, 2) x R: a core (1, 5/3) x (-1, 1) and
    two arms (3/4, 7/6) x (1/2, 1), (3/2, 23/12) x (1/2, 1) lying over U_1 ∩ U_2.
    """
    arcs = _circle_arcs()
    labels = [label_of(i) for i in ([1], [2], [3], [1, 2], [1, 3], [2, 3])]
    footprints = _footprints(arcs, labels)
    section = exprs(2, "x2", *(["0"] * (obs_dim - 1)))
    via = exprs(2, "x1")
    u3 = boxes(PLANE, [(1, Fraction(5, 3)), (-1, 1)], [(Fraction(3, 4), Fraction(7, 6)), (Fraction(1, 2), 1)],
               [(Fraction(3, 2), Fraction(23, 12)), (Fraction(1, 2), 1)])
    lifts = {
        label_of([1, 3]): boxes(PLANE, [(Fraction(4, 3), Fraction(5, 3)), (-1, 1)],
                                [(Fraction(3, 4), 1), (Fraction(1, 2), 1)],
                                [(Fraction(3, 2), Fraction(23, 12)), (Fraction(1, 2), 1)]),
        label_of([2, 3]): boxes(PLANE, [(1, Fraction(4, 3)), (-1, 1)],
                                [(Fraction(3, 4), Fraction(7, 6)), (Fraction(1, 2), 1)],
                                [(Fraction(5, 3), Fraction(23, 12)), (Fraction(1, 2), 1)]),
    }
    charts = {}
    for label in labels:
        if label == label_of([3]):
            domain = u3
        elif label in lifts:
            domain = lifts[label]
        else:
            domain = strip(footprints[label], (-1, 1))
        charts[label] = Chart(label, domain, obs_dim, section, via, footprints[label])
    return charts


def _wrapped_changes(charts: Dict[Label, Chart], twist: RationalMatrix) -> List[CoordChange]:
    """The lifts pi^{-1}: chart 1 lands on the left arm, chart 2 on the right arm."""
    c = {tuple(sorted(label)): chart for label, chart in charts.items()}
    identity = RationalMatrix.identity(c[(1,)].obs_dim)
    shift = exprs(2, "x1 + 1", "x2")
    stay = exprs(2, "x1", "x2")
    one_to_13 = change(c[(1,)], c[(1, 3)], [
        (boxes(CYLINDER, [(Fraction(1, 3), Fraction(2, 3)), (-1, 1)]), shift),
        (boxes(CYLINDER, [(Fraction(3, 4), 1), (Fraction(1, 2), 1)]), stay),
    ], identity)
    two_to_23 = change(c[(2,)], c[(2, 3)], [
        (boxes(CYLINDER, [(0, Fraction(1, 3)), (-1, 1)], [(Fraction(2, 3), Fraction(11, 12)), (Fraction(1, 2), 1)]),
         shift),
    ], twist)
    return [
        identity_change(c[(1,)], c[(1, 2)]),
        identity_change(c[(2,)], c[(1, 2)]),
        one_to_13,
        identity_change(c[(3,)], c[(1, 3)]),
        two_to_23,
        identity_change(c[(3,)], c[(2, 3)]),
    ]


def circle_injectivity_fail() -> AtlasFile:
    """U_3 -> |K| identifies (7/8, 3/4) with (15/8, 3/4); tame2 fails for {1} ⊂ {1,3}."""
    charts = _wrapped_charts(1)
    changes = _wrapped_changes(charts, RationalMatrix.identity(1))
    return _bundle("circle-injectivity-fail", 1, Domain.from_bounds([None], CIRCLE), list(charts.values()), changes)


def circle_linearity_fail() -> AtlasFile:
    """
    The wrapped atlas with E = C = R^2, phihat_{2,23} = diag(1, 2), and a fourth chart
    K_4 = K_3|(V ∪ V_3^2) with V the part of U_3 over F_13, which closes a second
    chain between the two witness points with identity fibre maps.
    """
    charts = _wrapped_charts(2)
    changes = _wrapped_changes(charts, matrix([1, 0], [0, 2]))
    three = charts[label_of([3])]
    section, via = three.section, three.footprint_map
    footprint = charts[label_of([1, 3])].footprint
    v = boxes(PLANE, [(Fraction(4, 3), Fraction(5, 3)), (-1, 1)])
    u4 = v.union(boxes(PLANE, [(Fraction(5, 3), Fraction(23, 12)), (Fraction(1, 2), 1)]))
    projected = boxes(CYLINDER, [(Fraction(1, 3), Fraction(2, 3)), (-1, 1)],
                      [(Fraction(2, 3), Fraction(11, 12)), (Fraction(1, 2), 1)])
    projected_v = boxes(CYLINDER, [(Fraction(1, 3), Fraction(2, 3)), (-1, 1)])
    extra = {
        label_of([4]): Chart(label_of([4]), u4, 2, section, via, footprint),
        label_of([1, 4]): Chart(label_of([1, 4]), projected, 2, section, via, footprint),
        label_of([3, 4]): Chart(label_of([3, 4]), u4, 2, section, via, footprint),
        label_of([1, 3, 4]): Chart(label_of([1, 3, 4]), v, 2, section, via, footprint),
    }
    charts.update(extra)
    c = {tuple(sorted(label)): chart for label, chart in charts.items()}
    identity = RationalMatrix.identity(2)
    changes += [
        identity_change(c[(1,)], c[(1, 4)]),
        change(c[(4,)], c[(1, 4)], [(u4, exprs(2, "x1 - 1", "x2"))], identity),
        identity_change(c[(3,)], c[(3, 4)]),
        identity_change(c[(4,)], c[(3, 4)]),
        change(c[(1,)], c[(1, 3, 4)], [(projected_v, exprs(2, "x1 + 1", "x2"))], identity),
        change(c[(1, 4)], c[(1, 3, 4)], [(projected_v, exprs(2, "x1 + 1", "x2"))], identity),
    ]
    changes += [identity_change(c[key], c[(1, 3, 4)]) for key in ((3,), (4,), (1, 3), (3, 4))]
    return _bundle("circle-linearity-fail", 0, Domain.from_bounds([None], CIRCLE), list(charts.values()), changes)


def hausdorff_fail() -> AtlasFile:
    """
    X = (-2, 2), U_1 = X x (-1, 1) with s = y, U_2 = {x > 0} ∪ {-y < x <= 0} as a
    staircase of boxes, U_12 = {x > 0}: [1, (0, y)] and [2, (0, y)] cannot be separated.
    """
    x = Domain.from_bounds([(-2, 2)])
    half = Domain.from_bounds([(0, 2)])
    u1 = strip(x, (-1, 1))
    u2 = boxes(PLANE, [(0, 2), (-1, 1)], *[[(Fraction(-j, 8), 2), (Fraction(j, 8), 1)] for j in range(1, 8)])
    u12 = strip(half, (-1, 1))
    one = Chart(label_of([1]), u1, 1, exprs(2, "x2"), exprs(2, "x1"), x)
    two = Chart(label_of([2]), u2, 1, exprs(2, "x2"), exprs(2, "x1"), half)
    both = Chart(label_of([1, 2]), u12, 1, exprs(2, "x2"), exprs(2, "x1"), half)
    changes = [identity_change(one, both), identity_change(two, both)]
    return _bundle("hausdorff-fail", 1, x, [one, two, both], changes)


def metrizability_fail() -> AtlasFile:
    """
    U_1 = (-1, 1) with E_1 = 0 embedded as x -> (x, 0) into U_12 = U_2 = (0, 1) x (-1, 1)
    with s = y: the quotient topology at [0] is finer than the plane's.
    """
    x = Domain.from_bounds([(-1, 1)])
    half = Domain.from_bounds([(0, 1)])
    one = Chart(label_of([1]), x, 0, ExprMap(1, ()), exprs(1, "x1"), x)
    plane = strip(half, (-1, 1))
    two = Chart(label_of([2]), plane, 1, exprs(2, "x2"), exprs(2, "x1"), half)
    both = Chart(label_of([1, 2]), plane, 1, exprs(2, "x2"), exprs(2, "x1"), half)
    changes = [change(one, both, [(half, exprs(1, "x1", "0"))], RationalMatrix.zeros(1, 0)),
               identity_change(two, both)]
    return _bundle("metrizability-fail", 1, x, [one, two, both], changes)


# dimension zero


def _single_zero(name: str, section: str, domain: Tuple, zeros: Sequence, v: Tuple, c: Tuple) -> AtlasFile:
    space = points(*zeros)
    chart = Chart(label_of([1]), Domain.from_bounds([domain]), 1, exprs(1, section), exprs(1, "x1"), space)
    reductions = {"V": {chart.label: Domain.from_bounds([v])}, "C": {chart.label: Domain.from_bounds([c])}}
    return _bundle(name, 0, space, [chart], [], reductions, seed=0)


def zero_linear() -> AtlasFile:
    return _single_zero("zero-linear", "x1", (-1, 1), [0], (Fraction(-1, 2), Fraction(1, 2)),
                        (Fraction(-1, 4), Fraction(1, 4)))


def zero_quadratic() -> AtlasFile:
    return _single_zero("zero-quadratic", "x1^2 - 1", (-2, 2), [-1, 1], (Fraction(-3, 2), Fraction(3, 2)),
                        (Fraction(-6, 5), Fraction(6, 5)))


def zero_square() -> AtlasFile:
    """A degenerate zero: only a perturbation makes s transverse."""
    return _single_zero("zero-square", "x1^2", (-1, 1), [0], (Fraction(-1, 2), Fraction(1, 2)),
                        (Fraction(-1, 4), Fraction(1, 4)))


def zero_two_chart() -> AtlasFile:
    """
    X = {0, 1}: s_1 = x(x - 1) on (-1/2, 3/2) sees both points, s_2 = x - 1 only 1, and
    U_12 ⊂ R^2 carries s_12 = (x1(x1 - 1), x2) with E_1, E_2 as the coordinate axes.
    """
    space = points(0, 1)
    one = Chart(label_of([1]), Domain.from_bounds([(Fraction(-1, 2), Fraction(3, 2))]), 1,
                exprs(1, "x1*(x1 - 1)"), exprs(1, "x1"), space)
    two = Chart(label_of([2]), Domain.from_bounds([(Fraction(1, 2), Fraction(3, 2))]), 1,
                exprs(1, "x1 - 1"), exprs(1, "x1"), points(1))
    both = Chart(label_of([1, 2]), Domain.from_bounds([(Fraction(1, 2), Fraction(3, 2)), (Fraction(-1, 2), Fraction(1, 2))]),
                 2, exprs(2, "x1*(x1 - 1)", "x2"), exprs(2, "x1"), points(1))
    overlap = Domain.from_bounds([(Fraction(1, 2), Fraction(3, 2))])
    changes = [change(one, both, [(overlap, exprs(1, "x1", "0"))], matrix([1], [0])),
               change(two, both, [(overlap, exprs(1, "1", "x1 - 1"))], matrix([0], [1]))]
    empty = Domain.empty(1)
    reductions = {
        "V": {one.label: Domain.from_bounds([(Fraction(-1, 4), Fraction(3, 4))]), two.label: empty,
              both.label: Domain.from_bounds([(Fraction(5, 8), Fraction(11, 8)), (Fraction(-1, 4), Fraction(1, 4))])},
        "C": {one.label: Domain.from_bounds([(Fraction(-1, 8), Fraction(11, 16))]), two.label: empty,
              both.label: Domain.from_bounds([(Fraction(11, 16), Fraction(5, 4)), (Fraction(-1, 8), Fraction(1, 8))])},
    }
    return _bundle("zero-two-chart", 0, space, [one, two, both], changes, reductions, seed=0)


ATLASES: Dict[str, Callable[[], AtlasFile]] = {
    "circle-basic": circle_basic,
    "circle-additive": circle_additive,
    "circle-injectivity-fail": circle_injectivity_fail,
    "circle-linearity-fail": circle_linearity_fail,
    "hausdorff-fail": hausdorff_fail,
    "metrizability-fail": metrizability_fail,
    "zero-linear": zero_linear,
    "zero-quadratic": zero_quadratic,
    "zero-square": zero_square,
    "zero-two-chart": zero_two_chart,
}


def load_atlas(name: str) -> AtlasFile:
    if name not in ATLASES:
        raise ValueError(f"unknown atlas {name!r}; known: {', '.join(ATLASES)}")
    return ATLASES[name]()


SHIPPED_DIR = os.path.join(os.path.dirname(__file__), "atlases")
SHIPPED = ("circle-injectivity-fail", "circle-linearity-fail", "hausdorff-fail", "metrizability-fail")


def shipped_path(name: str) -> str:
    """Path of the hand-kept ``.atlas`` file for a counterexample."""
    if name not in SHIPPED:
        raise ValueError(f"no shipped file for {name!r}; shipped: {', '.join(SHIPPED)}")
    return os.path.join(SHIPPED_DIR, f"{name}.atlas")


# demos


@dataclass
class DemoOutcome:
    name: str
    atlas: str
    expected: str
    ok: bool
    reports: List[CheckReport] = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"demo {self.name} on {self.atlas}: {'as expected' if self.ok else 'UNEXPECTED'}",
                 f"expected: {self.expected}"]
        lines.extend(report.summary() for report in self.reports)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "atlas": self.atlas,
            "expected": self.expected,
            "ok": self.ok,
            "reports": [report.to_dict() for report in self.reports],
        }


def _validation(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
    atlas = bundle.atlas
    reports = [check_covering(atlas), validate_maps(atlas, config.resolution, config.map_tolerance),
               validate_index(atlas, config.resolution), validate_cocycles(atlas, config.level, config.resolution)]
    return all_passed(reports), reports


def _circle_basic_demo(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
    ok, reports = _validation(bundle, config)
    additivity = validate_additivity(bundle.atlas)
    return ok and not additivity.passed, reports + [additivity]


def _circle_additive_demo(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
    ok, reports = _validation(bundle, config)
    extra = [validate_additivity(bundle.atlas), validate_tameness(bundle.atlas, config.resolution)]
    return ok and all_passed(extra), reports + extra


def _injectivity_demo(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
    atlas = bundle.atlas
    three = label_of([3])
    first, second = INJECTIVITY_WITNESSES
    exact = CheckReport("witness pair")
    if equivalent(atlas, (three, first), (three, second)):
        exact.flag(format_label(three), (first, second), "(3, x1) ~ (3, x2) through charts 13, 1, 12, 2, 23")
    report = diagnose_injectivity(build_quotient(atlas, config.resolution))
    found = any(w.label == format_label(three) for w in report.witnesses)
    return found and bool(exact.witnesses), [exact, report]


def _linearity_demo(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
    quotient = build_quotient(bundle.atlas, config.resolution)
    report = fiber_structure(quotient, label_of([3]), INJECTIVITY_WITNESSES[0])
    return report.details["linear"] is False, [report]


def _hausdorff_demo(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
    report = diagnose_hausdorff(build_quotient(bundle.atlas, config.resolution))
    found = any(w.point[0][0] == 0 and w.point[0][1] > 0 for w in report.witnesses)
    return found, [report]


def _metrizability_demo(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
    report = diagnose_metrizability(bundle.atlas, label_of([1]), label_of([2]))
    return report.details["radii_with_witness"] == len(RADII), [report]


def _count_demo(expected: int, oracle: bool) -> Callable[[AtlasFile, RunConfig], Tuple[bool, List[CheckReport]]]:
    def run(bundle: AtlasFile, config: RunConfig) -> Tuple[bool, List[CheckReport]]:
        atlas = bundle.atlas
        reduction, nested = bundle.reductions["V"], bundle.reductions["C"]
        constants = compute_constants(atlas, reduction, nested, resolution=config.resolution)
        alternative = second_reduction(atlas, nested, resolution=config.resolution)
        report = independence_test(atlas, reduction, nested, constants, config.seeds, config.resolution,
                                   bundle.orientation or None, alternatives=[alternative])
        ok = report.details["total"] == f"{expected:+d}"
        if oracle:
            chart = atlas.chart(label_of([1]))
            degree = derivative_sign_oracle(chart.section, reduction.domains[chart.label], config.resolution)
            report.details["oracle"] = f"{degree:+d}"
            ok = ok and degree == expected
        return ok, [report]
    return run


@dataclass
class Demo:
    atlas: str
    expected: str
    run: Callable[[AtlasFile, RunConfig], Tuple[bool, List[CheckReport]]]


DEMOS: Dict[str, Demo] = {
    "circle-basic": Demo("circle-basic", "all checks pass; E_12 = R is not additive", _circle_basic_demo),
    "circle-additive": Demo("circle-additive", "all checks pass; additive and tame", _circle_additive_demo),
    "injectivity-fail": Demo("circle-injectivity-fail", "a witness pair x != x' in U_3 with [3, x] = [3, x']",
                             _injectivity_demo),
    "linearity-fail": Demo("circle-linearity-fail", "fibre over [3, (7/8, 3/4)] identifies e ~ diag(1, 2) e",
                           _linearity_demo),
    "hausdorff-fail": Demo("hausdorff-fail", "classes over (0, y), y > 0 without disjoint neighbourhoods",
                           _hausdorff_demo),
    "metrizability-fail": Demo("metrizability-fail", "a point within every radius of [0] outside U_f,1/2",
                               _metrizability_demo),
    "zero-linear": Demo("zero-linear", "signed count +1", _count_demo(1, oracle=True)),
    "zero-quadratic": Demo("zero-quadratic", "signed count 0 (signs -, +)", _count_demo(0, oracle=True)),
    "zero-square": Demo("zero-square", "signed count 0", _count_demo(0, oracle=False)),
    "zero-two-chart": Demo("zero-two-chart", "signed count 0 across both charts", _count_demo(0, oracle=False)),
}


def run_demo(name: str, config: Optional[RunConfig] = None) -> DemoOutcome:
    """
    Run the designated diagnostic of a demo and compare with its known outcome.

    :raises ValueError: for an unknown demo name.
    """
    if name not in DEMOS:
        raise ValueError(f"unknown demo {name!r}; known: {', '.join(DEMOS)}")
    config = config or RunConfig.from_env(resolution=default_resolution())
    demo = DEMOS[name]
    bundle = load_atlas(demo.atlas)
    try:
        ok, reports = demo.run(bundle, config)
    except KuranishiError as e:
        logging.error(e, exc_info=True)
        failed = CheckReport(name).fail(e)
        return DemoOutcome(name, demo.atlas, demo.expected, False, [failed])
    logging.info(f"demo {name}: {'as expected' if ok else 'unexpected outcome'}")
    return DemoOutcome(name, demo.atlas, demo.expected, ok, reports)
