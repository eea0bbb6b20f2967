"""
Exception hierarchy for kuranishi_atlas.

Every error derives from KuranishiError. Errors caused by bad input also derive
from ValueError so that callers can treat them like any other invalid argument.
Errors that carry a witness keep it as an attribute for reports.
"""
from typing import Any, Optional, Sequence


class KuranishiError(Exception):
    """Base class for all errors raised by this package."""


# exterior

class DegreeError(KuranishiError, ValueError):
    pass


class SingularMapError(KuranishiError, ValueError):
    pass


class KernelMismatchError(KuranishiError, ValueError):
    pass


class StabilizationError(KuranishiError, ValueError):
    pass


class NotTransverseError(KuranishiError):
    pass


# geometry and expr

class DimensionError(KuranishiError, ValueError):
    pass


class EvalError(KuranishiError, ArithmeticError):
    def __init__(self, message: str, location: Optional[str] = None) -> None:
        super().__init__(message if location is None else f"{message} at {location}")
        self.location = location


class ExprSyntaxError(KuranishiError, ValueError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (position {position})")
        self.message = message
        self.position = position


class ZeroSetError(KuranishiError):
    pass


# chart

class FootprintError(KuranishiError, ValueError):
    pass


class MapAxiomViolation(KuranishiError):
    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


class IndexConditionViolation(KuranishiError):
    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


class CompositionError(KuranishiError, ValueError):
    pass


class NonAffineError(KuranishiError):
    """An exact set operation needs an axis-affine embedding."""


# atlas

class CocycleViolation(KuranishiError):
    def __init__(self, level: str, triple: Sequence, witness: Any = None) -> None:
        super().__init__(f"{level} cocycle condition fails on {format_triple(triple)}")
        self.level = level
        self.triple = tuple(triple)
        self.witness = witness


class AdditivityViolation(KuranishiError):
    def __init__(self, index_set, message: str = "") -> None:
        super().__init__(f"additivity fails for {format_label(index_set)}" + (f": {message}" if message else ""))
        self.index_set = index_set


class TamenessViolation(KuranishiError):
    def __init__(self, equation: str, indices: Sequence, witness: Any = None) -> None:
        super().__init__(f"{equation} fails for {format_triple(indices)}")
        self.equation = equation
        self.indices = tuple(indices)
        self.witness = witness


# reduction and shrink

class CoverError(KuranishiError):
    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


class ReductionError(KuranishiError):
    pass


class ShrinkError(KuranishiError):
    def __init__(self, message: str, lost=None) -> None:
        super().__init__(message)
        self.lost = lost


class TamingError(KuranishiError):
    def __init__(self, level: int, condition: str, witness: Any = None) -> None:
        super().__init__(f"taming level {level}: {condition}")
        self.level = level
        self.condition = condition
        self.witness = witness


class LemmaHypothesisError(KuranishiError):
    pass


class MetricError(KuranishiError):
    pass


# perturbation

class ConstantsError(KuranishiError):
    pass


class ZoneError(KuranishiError):
    pass


class TransversalityError(KuranishiError):
    pass


class AdaptedError(KuranishiError):
    def __init__(self, condition: str, witness: Any = None, message: str = "") -> None:
        super().__init__(f"condition {condition} fails" + (f": {message}" if message else ""))
        self.condition = condition
        self.witness = witness


# zero sets

class ZeroIsolationError(KuranishiError):
    def __init__(self, message: str, box: Any = None) -> None:
        super().__init__(message)
        self.box = box


class CompactnessError(KuranishiError):
    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


class OrientationTransportError(KuranishiError):
    pass


class IndependenceFailure(KuranishiError):
    pass


# cli

class AtlasFileError(KuranishiError, ValueError):
    def __init__(self, message: str, line: int, column: int = 1) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class StageError(KuranishiError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


def format_label(index_set) -> str:
    return "{" + ",".join(str(i) for i in sorted(index_set)) + "}"


def format_triple(indices: Sequence) -> str:
    return "(" + ", ".join(format_label(i) if isinstance(i, (set, frozenset)) else str(i) for i in indices) + ")"
