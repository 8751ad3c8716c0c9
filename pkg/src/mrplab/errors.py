"""Exception hierarchy shared across the library."""


class MrplabError(Exception):
    """Base class for all library errors."""


class InvalidSpecError(MrplabError):
    """An operation requiring a valid MRP received one that fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid MRP spec: {lines}")


class SpecMismatchError(MrplabError):
    """A dataset's fingerprint does not match the spec it is used with."""


class StepCapError(MrplabError):
    """A sampled trajectory exceeded the step cap (near-non-terminating spec)."""


class SingularSystemError(MrplabError):
    """A linear system was numerically singular (non-terminating chain)."""


class CyclicSpecError(MrplabError):
    """Exact trajectory enumeration requested on a spec with cycles."""


class EnumerationCapError(MrplabError):
    """Trajectory enumeration exceeded the atom cap."""


class UnknownStateError(MrplabError):
    """A state name does not exist in the spec."""


class UndefinedEstimateError(MrplabError):
    """A requested estimate is undefined because the state was never visited."""


class DisjointViolationError(MrplabError):
    """The two states can be visited by a single trajectory, so the bound's
    hypothesis fails."""


class InfeasibleMarginalsError(MrplabError):
    """Supply and demand of a transportation problem do not balance."""


class DegenerateRatioError(MrplabError):
    """TD/MC variance ratio requested where the MC variance is zero."""


class DegenerateAdvantageError(MrplabError):
    """Regret requested for a state pair whose exact advantage is ~zero."""


class ConfigError(MrplabError):
    """An experiment configuration violates its invariants."""
