"""Exception hierarchy shared across the toolkit."""


class PhysPartsError(Exception):
    """Base class for all toolkit errors."""


class MissingFile(PhysPartsError):
    pass


class SchemaViolation(PhysPartsError):
    """Raised when structured input violates the asset schema.

    Carries the offending field path, e.g. "parts[2].affordance_rank".
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class MeshParseError(PhysPartsError):
    def __init__(self, filename, line_no, message):
        self.filename = filename
        self.line_no = line_no
        super().__init__(f"{filename}:{line_no}: {message}")


class ValidationError(PhysPartsError):
    """An asset failed validate_asset where a valid one is required."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s): {lines}")


class IoError(PhysPartsError):
    pass


class EmptyGeometry(PhysPartsError):
    pass


class NoContact(PhysPartsError):
    pass


class DegenerateInput(PhysPartsError):
    pass


class UnknownPart(PhysPartsError):
    pass


class ShapeMismatch(PhysPartsError):
    pass


class BackendUnavailable(PhysPartsError):
    pass


class RateLimited(PhysPartsError):
    pass


class Timeout(PhysPartsError):
    pass


class UnparseableResponse(PhysPartsError):
    pass


class LabelMismatch(PhysPartsError):
    pass


class NotApproved(PhysPartsError):
    pass


class NoCompatibleRegion(PhysPartsError):
    pass


class ScaleOutOfBounds(PhysPartsError):
    pass


class ValidationFailure(PhysPartsError):
    pass


class UnannotatedPart(PhysPartsError):
    pass


class WrongArity(PhysPartsError):
    pass


class EmbedderUnavailable(PhysPartsError):
    pass


class Divergence(PhysPartsError):
    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class StateTransitionError(PhysPartsError):
    pass


class NoAdjacentPart(PhysPartsError):
    pass
