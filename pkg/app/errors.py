"""
Exception hierarchy for the scene reasoner.

Two families matter to callers:
- InputError: the caller handed us something invalid (CLI exit code 2)
- ContractViolation: an internal invariant broke (CLI exit code 3)
"""

from typing import List, Optional, Sequence


class SceneReasonerError(Exception):
    """Base class for every error raised by this package."""

    exit_code: int = 1


class InputError(SceneReasonerError):
    """Invalid user-supplied input (files, flags, datasets)."""

    exit_code = 2


class ParseError(InputError):
    """
    Malformed syntax or schema.

    Attributes:
        offset: Byte offset of a JSON syntax error, when known
        path: Field path of a schema error, e.g. "detections.0.bbox"
    """

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        super().__init__(message)
        self.offset = offset
        self.path = path


class DetectionValidationError(InputError):
    """Detection records that parse but break an invariant."""

    def __init__(self, message: str, record_indices: Sequence[int] = ()):
        super().__init__(message)
        self.record_indices: List[int] = list(record_indices)


class EmptySceneError(InputError):
    """No detection survived filtering, so there is nothing to seed a search from."""


class KnowledgeGraphError(InputError):
    """Knowledge graph failed to load or validate."""

    def __init__(self, message: str, violations: Sequence[object] = ()):
        super().__init__(message)
        self.violations = list(violations)


class CheckpointMismatchError(InputError):
    """Checkpoint dimensions or classes disagree with the knowledge graph or config."""


class DatasetError(InputError):
    """Manifest problems, unknown labels or an empty dataset."""


class ContractViolation(SceneReasonerError):
    """An internal invariant was broken."""

    exit_code = 3


class ShapeError(ContractViolation):
    """Dimension mismatch between operands."""


class NumericError(ContractViolation):
    """An op produced NaN or Inf."""


class TrainingDivergedError(ContractViolation):
    """Training loss became non-finite."""

    def __init__(self, message: str, diagnostic: Optional[dict] = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}
