"""Exception hierarchy shared by every module.

Each class carries a ``category`` string used by the CLI to map failures to
exit codes and machine-parsable error lines.
"""

from __future__ import annotations


class GmsdiError(Exception):
    category = "error"


class ConfigurationError(GmsdiError, ValueError):
    category = "config"


class DimensionError(GmsdiError, ValueError):
    category = "dimension"


class NonFiniteError(GmsdiError, ValueError):
    category = "nonfinite"


class ScheduleError(ConfigurationError):
    category = "schedule"


class VocabularyError(GmsdiError, KeyError):
    category = "vocabulary"

    def __init__(self, label: str, known: list[str]):
        self.label = label
        self.known = list(known)
        super().__init__(f"unknown label {label!r}; known labels: {', '.join(self.known)}")

    def __str__(self) -> str:
        # KeyError.__str__ would repr() the message
        return self.args[0]


class DegenerateDensityError(GmsdiError, ValueError):
    category = "degenerate"


class DivergenceError(GmsdiError, FloatingPointError):
    """Raised when an integrator produces non-finite values."""

    category = "divergence"

    def __init__(self, message: str, step: int | None = None, trajectory: int | None = None):
        self.step = step
        self.trajectory = trajectory
        where = []
        if trajectory is not None:
            where.append(f"trajectory={trajectory}")
        if step is not None:
            where.append(f"step={step}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class TrainingDivergenceError(DivergenceError):
    category = "training"


class UndefinedMetricError(GmsdiError, ValueError):
    category = "metric"


class FormatError(GmsdiError, ValueError):
    """Malformed or unsupported file content. ``field`` names the culprit."""

    category = "format"

    def __init__(self, message: str, field: str | None = None, path: str | None = None):
        self.field = field
        self.path = path
        parts = [message]
        if field:
            parts.append(f"field={field}")
        if path:
            parts.append(f"path={path}")
        super().__init__("; ".join(parts))
