"""
Stages shared by the command line and the service: validation, taming, reduction,
perturbation and counting. Every stage works on an AtlasFile bundle and can write
it back out, so a run can be resumed from any intermediate file.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from kuranishi_atlas.atlas import (
    Atlas,
    check_covering,
    validate_additivity,
    validate_cocycles,
    validate_index,
    validate_maps,
    validate_tameness,
)
from kuranishi_atlas.atlas_file import AtlasFile, write_atlas
from kuranishi_atlas.config import RunConfig
from kuranishi_atlas.errors import KuranishiError, StageError
from kuranishi_atlas.geometry import MetricSample
from kuranishi_atlas.perturbation import (
    Perturbation,
    PerturbationConstants,
    compute_constants,
    construct_adapted,
    second_reduction,
)
from kuranishi_atlas.reduction import AtlasReduction, atlas_reduce, nest_reduction, validate_reduction
from kuranishi_atlas.reports import CheckReport, merge_reports, write_witnesses
from kuranishi_atlas.shrink import TamingState, preshrunk, sampled_metric, tame_shrink
from kuranishi_atlas.zeroset_vfc import SignedCount, count_zeros, independence_test, orientation_transport

STAGES = ("reduce", "shrink", "tame", "perturb", "count")


def run_checks(atlas: Atlas, config: RunConfig) -> CheckReport:
    """The covering check followed by the checks named in ``config.checks``."""
    runners = {
        "maps": lambda: validate_maps(atlas, config.resolution, config.map_tolerance),
        "index": lambda: validate_index(atlas, config.resolution),
        "cocycle": lambda: validate_cocycles(atlas, config.level, config.resolution),
        "additivity": lambda: validate_additivity(atlas),
        "tame": lambda: validate_tameness(atlas, config.resolution),
    }
    reports = [check_covering(atlas)] + [runners[name]() for name in config.checks]
    report = merge_reports("validate", reports)
    logging.info(f"validate {atlas.name}: {report.status}")
    return report


def perturbation_of(bundle: AtlasFile) -> Optional[Perturbation]:
    if bundle.seed is None and not bundle.nu:
        return None
    sections = {label: section for label, (_, section) in bundle.nu.items()}
    domains = {label: domain for label, (domain, _) in bundle.nu.items()}
    return Perturbation(sections, domains, bundle.seed or 0)


def with_perturbation(bundle: AtlasFile, nu: Perturbation) -> AtlasFile:
    atlas = bundle.atlas
    nu_lines = {label: (nu.domains.get(label, atlas.chart(label).domain), section)
                for label, section in nu.sections.items()}
    return AtlasFile(atlas, bundle.reductions, bundle.orientation, nu.seed, nu_lines)


@dataclass
class PipelineRun:
    bundle: AtlasFile
    config: RunConfig
    transcript: List[str] = field(default_factory=list)
    reports: List[CheckReport] = field(default_factory=list)
    constants: Optional[PerturbationConstants] = None
    count: Optional[SignedCount] = None
    metric: Optional[MetricSample] = None
    files: List[str] = field(default_factory=list)

    def note(self, line: str) -> None:
        self.transcript.append(line)
        logging.info(line)

    def reductions(self, stage: str) -> Tuple[AtlasReduction, AtlasReduction]:
        found = self.bundle.reductions
        if "V" not in found or "C" not in found:
            raise StageError(stage, "needs the reductions V and C; run reduce first")
        return found["V"], found["C"]

    def ensure_constants(self, stage: str) -> PerturbationConstants:
        if self.constants is None:
            reduction, nested = self.reductions(stage)
            self.constants = compute_constants(self.bundle.atlas, reduction, nested, metric=self.metric,
                                               resolution=self.config.resolution)
            self.note("constants " + " ".join(f"{k}={v}" for k, v in self.constants.to_dict().items()))
        return self.constants


def _tame(run: PipelineRun) -> None:
    levels: List[TamingState] = []
    tamed = tame_shrink(run.bundle.atlas, resolution=run.config.resolution, transcript=levels)
    run.bundle = AtlasFile(tamed, orientation=run.bundle.orientation)
    for state in levels:
        run.note(f"tame level {state.level}: {len(state.domains)} domains")


def _shrink(run: PipelineRun) -> None:
    shrinking = preshrunk(run.bundle.atlas, resolution=run.config.resolution)
    run.metric = sampled_metric(shrinking.original, shrinking, run.config.resolution)
    run.bundle = AtlasFile(shrinking.atlas, orientation=run.bundle.orientation)
    run.note(f"preshrunk {shrinking.original.name} then {shrinking.atlas.name}")
    run.note(f"metric ratios {run.metric.ratio_bounds[0]:.6g}..{run.metric.ratio_bounds[1]:.6g}")


def _reduce(run: PipelineRun) -> None:
    atlas = run.bundle.atlas
    reduction = atlas_reduce(atlas, resolution=run.config.resolution)
    nested = nest_reduction(atlas, reduction, run.config.resolution)
    for name, candidate in (("V", reduction), ("C", nested)):
        report = validate_reduction(atlas, candidate, run.config.resolution)
        report.name = f"reduction {name}"
        run.reports.append(report)
        report.raise_for_status()
    run.bundle = AtlasFile(atlas, {"V": reduction, "C": nested}, run.bundle.orientation)
    run.note(f"reduction V on {len(reduction.nonempty())} charts, C on {len(nested.nonempty())} charts")


def _perturb(run: PipelineRun) -> None:
    atlas = run.bundle.atlas
    reduction, nested = run.reductions("perturb")
    constants = run.ensure_constants("perturb")
    nu = construct_adapted(atlas, reduction, nested, constants, seed=run.config.seeds[0],
                           resolution=run.config.resolution)
    run.transcript.extend(nu.transcript)
    run.bundle = with_perturbation(run.bundle, nu)
    if run.config.independence:
        alternative = second_reduction(atlas, nested, run.metric, run.config.resolution)
        report = independence_test(atlas, reduction, nested, constants, run.config.seeds, run.config.resolution,
                                   run.bundle.orientation or None, alternatives=[alternative])
        run.reports.append(report)
        run.note(f"independence over seeds {run.config.seeds}: all totals equal ({report.details['total']})")


def _count(run: PipelineRun) -> None:
    atlas = run.bundle.atlas
    reduction, nested = run.reductions("count")
    nu = perturbation_of(run.bundle) or Perturbation({}, dict(reduction.domains), 0)
    orientation = run.bundle.orientation or None
    transport = orientation_transport(atlas, orientation, run.config.resolution)
    run.reports.append(transport)
    transport.raise_for_status()
    run.count = count_zeros(atlas, reduction, nested, nu, run.config.resolution, orientation)
    run.note(f"signed count {run.count.total:+d} over {len(run.count.classes)} classes")


_RUNNERS = {"reduce": _reduce, "shrink": _shrink, "tame": _tame, "perturb": _perturb, "count": _count}


def run_stages(bundle: AtlasFile, stages: List[str], config: RunConfig) -> PipelineRun:
    """
    Run ``stages`` in order, writing ``<out>/<n>-<stage>.atlas`` after each when
    ``config.out`` is set.

    :raises StageError: naming the stage whose construction failed.
    """
    unknown = [stage for stage in stages if stage not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown stages: {', '.join(unknown)}")
    run = PipelineRun(bundle, config)
    for number, stage in enumerate(stages, start=1):
        try:
            _RUNNERS[stage](run)
        except StageError:
            raise
        except KuranishiError as e:
            logging.error(e, exc_info=True)
            raise StageError(stage, str(e)) from e
        if config.out:
            path = os.path.join(config.out, f"{number:02d}-{stage}.atlas")
            os.makedirs(config.out, exist_ok=True)
            write_atlas(path, run.bundle)
            run.files.append(path)
    if config.out:
        _write_outputs(run)
    return run


def _write_outputs(run: PipelineRun) -> None:
    out = run.config.out
    path = os.path.join(out, "transcript.txt")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(run.transcript) + "\n")
    run.files.append(path)
    if run.count is not None:
        for name, text in (("count.csv", run.count.to_csv()), ("count.txt", run.count.report() + "\n")):
            path = os.path.join(out, name)
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(text)
            run.files.append(path)
    if any(report.witnesses for report in run.reports):
        path = os.path.join(out, "witnesses.csv")
        write_witnesses(path, run.reports)
        run.files.append(path)


def count_summary(run: PipelineRun) -> Dict:
    result = {"transcript": run.transcript, "reports": [report.to_dict() for report in run.reports]}
    if run.constants is not None:
        result["constants"] = run.constants.to_dict()
    if run.count is not None:
        result["total"] = run.count.total
        result["classes"] = [dict(zip(("class", "chart", "coordinates", "sign"), row)) for row in run.count.rows()]
    return result
