"""Exception types raised across the package.

Every domain error derives from :class:`VQualError` so callers (and the CLI)
can catch one base class and report a structured diagnostic.
"""

from __future__ import annotations


class VQualError(Exception):
    """Base class for all domain errors."""

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


# score fusion
class CalibrationDegenerate(VQualError):
    pass


class CalibrationNoConverge(VQualError):
    def __init__(self, message: str, best=None, residual: float | None = None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class RescaleDegenerate(VQualError):
    pass


class MissingCalibration(VQualError):
    def __init__(self, annotator_id: str):
        super().__init__(f"no calibration map for annotator {annotator_id!r}")
        self.annotator_id = annotator_id


class InvalidTable(VQualError):
    pass


# pmod / probabilities
class InvalidSummary(VQualError):
    pass


class InvalidDistribution(VQualError):
    pass


# losses
class InfiniteDivergence(VQualError):
    pass


class InfiniteLoss(VQualError):
    pass


# distortions / codecs
class InvalidSpec(VQualError):
    pass


class InvalidImage(VQualError):
    pass


class CodecUnavailable(VQualError):
    pass


class EncodeFailed(VQualError):
    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


# metrics / stats
class MetricInfeasible(VQualError):
    pass


class CorrelationDegenerate(VQualError):
    pass


# dataset pipeline
class PairBudgetExhausted(VQualError):
    def __init__(self, message: str, achieved: dict | None = None):
        super().__init__(message)
        self.achieved = achieved or {}

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["achieved"] = self.achieved
        return d


class JudgeUnavailable(VQualError):
    pass


class InvalidRecord(VQualError):
    pass
