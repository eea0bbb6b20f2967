"""
Atlas files: a line-oriented text format for atlases, reductions, orientations and perturbations.

::

    kuranishi-atlas v1
    atlas <name> dim <D>
    space <domain> [periodic <axes>]
    chart <I> domain <domain> [periodic <axes>] obs <m> section <exprs> footprint <domain> [periodic <axes>] via <exprs>
    change <I> -> <J> domain <domain> map <exprs> linear <rows>x<cols> [<matrix>]
    reduction <name> <I> <domain>
    orientation <I> standard|reversed
    perturbation seed <seed>
    nu <I> on <domain> section <exprs>

A domain is ``empty`` or boxes joined by `` u ``; a box is intervals joined by ``x``,
each ``(lo,hi)``, ``{c}`` or ``S1``. Labels are written ``{1,2}``, axes are 1-based,
expression lists are ``<e1; e2>`` and matrices ``[a b; c d]``. Repeated ``change``
lines for one pair add pieces. Lines starting with ``#`` are comments.
"""
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

from kuranishi_atlas.atlas import Atlas, sort_key
from kuranishi_atlas.chart import ChangePiece, Chart, CoordChange, Label
from kuranishi_atlas.errors import AtlasFileError, DimensionError, ExprSyntaxError, KuranishiError, format_label
from kuranishi_atlas.expr import ExprMap, parse
from kuranishi_atlas.exterior import DetLineElement, RationalMatrix, standard_orientation
from kuranishi_atlas.geometry import Box, Domain, Interval
from kuranishi_atlas.reduction import AtlasReduction

HEADER = "kuranishi-atlas v1"

_LABEL = r"\{\d+(?:,\d+)*\}"
_AXES = r"\d+(?:,\d+)*"
_ATLAS = re.compile(r"atlas (?P<name>\S+) dim (?P<dim>\d+)$")
_SPACE = re.compile(rf"space (?P<domain>.+?)(?: periodic (?P<periodic>{_AXES}))?$")
_CHART = re.compile(
    rf"chart (?P<label>{_LABEL}) domain (?P<domain>.+?)(?: periodic (?P<periodic>{_AXES}))? obs (?P<obs>\d+) "
    rf"section <(?P<section>[^<>]*)> footprint (?P<footprint>.+?)(?: periodic (?P<fperiodic>{_AXES}))? "
    rf"via <(?P<via>[^<>]*)>$")
_CHANGE = re.compile(
    rf"change (?P<source>{_LABEL}) -> (?P<target>{_LABEL}) domain (?P<domain>.+?) map <(?P<map>[^<>]*)> "
    rf"linear (?P<rows>\d+)x(?P<cols>\d+) \[(?P<matrix>[^\[\]]*)\]$")
_REDUCTION = re.compile(rf"reduction (?P<name>\S+) (?P<label>{_LABEL}) (?P<domain>.+)$")
_ORIENTATION = re.compile(rf"orientation (?P<label>{_LABEL}) (?P<kind>standard|reversed)$")
_SEED = re.compile(r"perturbation seed (?P<seed>-?\d+)$")
_NU = re.compile(rf"nu (?P<label>{_LABEL}) on (?P<domain>.+?) section <(?P<section>[^<>]*)>$")


@dataclass
class AtlasFile:
    atlas: Atlas
    reductions: Dict[str, AtlasReduction] = field(default_factory=dict)
    orientation: Dict[Label, DetLineElement] = field(default_factory=dict)
    seed: Optional[int] = None
    nu: Dict[Label, Tuple[Domain, ExprMap]] = field(default_factory=dict)


# pieces


def parse_label(text: str) -> Label:
    return frozenset(int(part) for part in text.strip("{}").split(","))


def parse_axes(text: Optional[str], dim: int) -> Tuple[bool, ...]:
    flags = [False] * dim
    if text:
        for part in text.split(","):
            axis = int(part) - 1
            if not 0 <= axis < dim:
                raise ValueError(f"periodic axis {part} outside 1..{dim}")
            flags[axis] = True
    return tuple(flags)


def format_axes(periodic: Sequence[bool]) -> str:
    axes = [str(k + 1) for k, p in enumerate(periodic) if p]
    return f" periodic {','.join(axes)}" if axes else ""


def parse_interval(text: str, periodic: bool) -> Interval:
    text = text.strip()
    if text == "S1":
        if not periodic:
            raise ValueError("S1 on a non-periodic axis")
        return Interval.circle()
    if text.startswith("{") and text.endswith("}"):
        return Interval.point(Fraction(text[1:-1]), periodic)
    if text.startswith("(") and text.endswith(")"):
        lo, hi = text[1:-1].split(",")
        interval = Interval.make(Fraction(lo), Fraction(hi), periodic)
        if interval is None or interval.lo == interval.hi:
            raise ValueError(f"empty interval {text}")
        return interval
    raise ValueError(f"cannot read interval {text!r}")


def parse_domain(text: str, periodic: Sequence[bool]) -> Domain:
    """Read ``empty`` or a box list in the dimension of ``periodic``."""
    text = text.strip()
    dim = len(periodic)
    if text == "empty":
        return Domain.empty(dim, periodic)
    boxes = []
    for chunk in text.split(" u "):
        parts = chunk.strip().split("x")
        if len(parts) != dim:
            raise DimensionError(f"box {chunk!r} has {len(parts)} axes, expected {dim}")
        boxes.append(Box(tuple(parse_interval(part, p) for part, p in zip(parts, periodic))))
    return Domain.empty(dim, periodic).with_boxes(boxes)


def _box_axes(text: str) -> int:
    first = text.strip().split(" u ")[0]
    return len(first.split("x"))


def parse_exprs(text: str, dim: int, offset: int = 0) -> ExprMap:
    """Read ``e1; e2`` as a map from R^dim; syntax errors carry their position in the whole line."""
    if not text.strip():
        return ExprMap(dim, ())
    components, start = [], 0
    for part in text.split(";"):
        lead = len(part) - len(part.lstrip())
        try:
            components.append(parse(part.strip(), dim))
        except ExprSyntaxError as e:
            raise ExprSyntaxError(e.message, offset + start + lead + e.position) from e
        start += len(part) + 1
    return ExprMap(dim, tuple(components))


def format_exprs(expr_map: ExprMap) -> str:
    return "<" + "; ".join(expr_map.texts()) + ">"


def parse_matrix(rows: int, cols: int, text: str) -> RationalMatrix:
    if rows == 0 or cols == 0:
        if text.strip():
            raise ValueError("entries given for an empty matrix")
        return RationalMatrix.zeros(rows, cols)
    entries = [[Fraction(v) for v in row.split()] for row in text.split(";")]
    if len(entries) != rows or any(len(row) != cols for row in entries):
        raise DimensionError(f"matrix entries do not form {rows}x{cols}")
    return RationalMatrix.from_rows(entries, rows, cols)


def format_matrix(matrix: RationalMatrix) -> str:
    body = "" if matrix.rows == 0 or matrix.cols == 0 else str(matrix)[1:-1]
    return f"{matrix.rows}x{matrix.cols} [{body}]"


# whole files


class _Reader:
    def __init__(self) -> None:
        self.name: Optional[str] = None
        self.dim: Optional[int] = None
        self.space: Optional[Domain] = None
        self.charts: Dict[Label, Chart] = {}
        self.changes: Dict[Tuple[Label, Label], CoordChange] = {}
        self.reductions: Dict[str, Dict[Label, Domain]] = {}
        self.orientation: Dict[Label, DetLineElement] = {}
        self.seed: Optional[int] = None
        self.nu: Dict[Label, Tuple[Domain, ExprMap]] = {}

    def chart(self, label: Label) -> Chart:
        if label not in self.charts:
            raise ValueError(f"chart {format_label(label)} is not declared")
        return self.charts[label]

    def read(self, line: str) -> Optional[re.Match]:
        if line.startswith("atlas "):
            match = _ATLAS.match(line)
            if match:
                self.name, self.dim = match["name"], int(match["dim"])
            return match
        if self.name is None:
            raise ValueError("the atlas line must come first")
        if line.startswith("space "):
            match = _SPACE.match(line)
            if match:
                periodic = parse_axes(match["periodic"], _box_axes(match["domain"]))
                self.space = parse_domain(match["domain"], periodic)
            return match
        if line.startswith("chart "):
            match = _CHART.match(line)
            if match:
                self._chart(match)
            return match
        if line.startswith("change "):
            match = _CHANGE.match(line)
            if match:
                self._change(match)
            return match
        if line.startswith("reduction "):
            match = _REDUCTION.match(line)
            if match:
                label = parse_label(match["label"])
                periodic = self.chart(label).domain.periodic
                self.reductions.setdefault(match["name"], {})[label] = parse_domain(match["domain"], periodic)
            return match
        if line.startswith("orientation "):
            match = _ORIENTATION.match(line)
            if match:
                chart = self.chart(parse_label(match["label"]))
                self.orientation[chart.label] = orientation_element(chart, match["kind"] == "reversed")
            return match
        if line.startswith("perturbation "):
            match = _SEED.match(line)
            if match:
                self.seed = int(match["seed"])
            return match
        if line.startswith("nu "):
            match = _NU.match(line)
            if match:
                chart = self.chart(parse_label(match["label"]))
                domain = parse_domain(match["domain"], chart.domain.periodic)
                section = parse_exprs(match["section"], chart.domain.dim, match.start("section"))
                if section.out_dim != chart.obs_dim:
                    raise DimensionError(f"nu has {section.out_dim} components, E has dimension {chart.obs_dim}")
                self.nu[chart.label] = (domain, section)
            return match
        return None

    def _chart(self, match: re.Match) -> None:
        if self.space is None:
            raise ValueError("the space line must come before the charts")
        label = parse_label(match["label"])
        if label in self.charts:
            raise ValueError(f"chart {format_label(label)} declared twice")
        periodic = parse_axes(match["periodic"], _box_axes(match["domain"]))
        domain = parse_domain(match["domain"], periodic)
        footprint = parse_domain(match["footprint"], parse_axes(match["fperiodic"], self.space.dim))
        section = parse_exprs(match["section"], domain.dim, match.start("section"))
        via = parse_exprs(match["via"], domain.dim, match.start("via"))
        self.charts[label] = Chart(label, domain, int(match["obs"]), section, via, footprint)

    def _change(self, match: re.Match) -> None:
        source, target = self.chart(parse_label(match["source"])), self.chart(parse_label(match["target"]))
        domain = parse_domain(match["domain"], source.domain.periodic)
        embedding = parse_exprs(match["map"], source.domain.dim, match.start("map"))
        if embedding.out_dim != target.domain.dim:
            raise DimensionError(f"map has {embedding.out_dim} components, U_{format_label(target.label)} has "
                                 f"dimension {target.domain.dim}")
        linear = parse_matrix(int(match["rows"]), int(match["cols"]), match["matrix"])
        if (linear.rows, linear.cols) != (target.obs_dim, source.obs_dim):
            raise DimensionError(f"linear part is {linear.rows}x{linear.cols}, expected "
                                 f"{target.obs_dim}x{source.obs_dim}")
        key = (source.label, target.label)
        piece = ChangePiece(domain, embedding)
        if key in self.changes:
            known = self.changes[key]
            if known.linear != linear:
                raise ValueError("pieces of one coordinate change have different linear parts")
            self.changes[key] = CoordChange(known.source, known.target, known.pieces + (piece,), linear,
                                            known.target_periodic)
        else:
            self.changes[key] = CoordChange(source.label, target.label, (piece,), linear, target.domain.periodic)

    def result(self) -> AtlasFile:
        if self.name is None or self.space is None:
            raise ValueError("missing atlas or space line")
        if not self.charts:
            raise ValueError("the atlas has no charts")
        atlas = Atlas(self.name, self.dim, self.space, self.charts, self.changes)
        reductions = {name: AtlasReduction(domains) for name, domains in self.reductions.items()}
        return AtlasFile(atlas, reductions, self.orientation, self.seed, self.nu)


def orientation_element(chart: Chart, reverse: bool = False) -> DetLineElement:
    element = standard_orientation(chart.domain.dim, chart.obs_dim)
    if not reverse:
        return element
    return DetLineElement(element.kernel, element.cokernel, -element.scale, "reversed standard bases")


def parse_atlas(text: str) -> AtlasFile:
    """
    Parse atlas file text.

    :raises AtlasFileError: with the line and column of the first problem.
    """
    reader = _Reader()
    lines = text.splitlines()
    started = False
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not started:
            if line != HEADER:
                raise AtlasFileError(f"expected header {HEADER!r}", number)
            started = True
            continue
        try:
            match = reader.read(line)
        except ExprSyntaxError as e:
            raise AtlasFileError(e.message, number, len(raw) - len(raw.lstrip()) + e.position + 1) from e
        except (KuranishiError, ValueError, ZeroDivisionError) as e:
            raise AtlasFileError(str(e), number) from e
        if match is None:
            keyword = line.split(" ", 1)[0]
            raise AtlasFileError(f"cannot read {keyword!r} line", number)
    if not started:
        raise AtlasFileError("empty file", 1)
    try:
        return reader.result()
    except ValueError as e:
        raise AtlasFileError(str(e), len(lines) or 1) from e


def format_atlas(bundle: AtlasFile) -> str:
    """Canonical text; parse_atlas(format_atlas(b)) reproduces b."""
    atlas = bundle.atlas
    lines = [HEADER, f"atlas {atlas.name} dim {atlas.dim}", f"space {atlas.space}{format_axes(atlas.space.periodic)}"]
    for label in atlas.labels:
        chart = atlas.chart(label)
        lines.append(f"chart {format_label(label)} domain {chart.domain}{format_axes(chart.domain.periodic)} "
                     f"obs {chart.obs_dim} section {format_exprs(chart.section)} footprint {chart.footprint}"
                     f"{format_axes(chart.footprint.periodic)} via {format_exprs(chart.footprint_map)}")
    for (source, target) in sorted(atlas.changes, key=lambda key: (sort_key(key[0]), sort_key(key[1]))):
        change = atlas.changes[(source, target)]
        for piece in change.pieces:
            lines.append(f"change {format_label(source)} -> {format_label(target)} domain {piece.domain} "
                         f"map {format_exprs(piece.embedding)} linear {format_matrix(change.linear)}")
    for name in sorted(bundle.reductions):
        for label in sorted(bundle.reductions[name].domains, key=sort_key):
            lines.append(f"reduction {name} {format_label(label)} {bundle.reductions[name].domains[label]}")
    for label in sorted(bundle.orientation, key=sort_key):
        kind = "reversed" if bundle.orientation[label].scale < 0 else "standard"
        lines.append(f"orientation {format_label(label)} {kind}")
    if bundle.seed is not None:
        lines.append(f"perturbation seed {bundle.seed}")
    for label in sorted(bundle.nu, key=sort_key):
        domain, section = bundle.nu[label]
        lines.append(f"nu {format_label(label)} on {domain} section {format_exprs(section)}")
    return "\n".join(lines) + "\n"


def read_atlas(path: str) -> AtlasFile:
    with open(path, encoding="utf-8") as handle:
        bundle = parse_atlas(handle.read())
    logging.info(f"read {bundle.atlas.name} from {path}")
    return bundle


def write_atlas(path: str, bundle: AtlasFile) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_atlas(bundle))
    logging.info(f"wrote {bundle.atlas.name} to {path}")
