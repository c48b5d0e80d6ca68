"""Exception types shared across the package."""


class StealthreachError(Exception):
    """Base class for all library errors."""


class InvalidMatrix(StealthreachError):
    """Matrix has non-finite entries or inconsistent dimensions."""


class SingularBlock(StealthreachError):
    """Trailing block of a Schur reduction is numerically singular."""


class NotPositiveDefinite(StealthreachError):
    """Matrix required to be positive definite is not."""


class SingularFactorization(StealthreachError):
    """Full-rank factorization requested for a numerically singular matrix."""


class ModelError(StealthreachError):
    """Dimension mismatch or ill-formed model/problem description."""


class InvalidSelection(StealthreachError):
    """Sensor selection indices are duplicated or out of range."""


class InvalidRate(StealthreachError):
    """Contraction rate outside the open interval (0, 1)."""


class NoContractiveRate(StealthreachError):
    """No grid rate admits a feasible contractive certificate."""


class MonitorInfeasible(StealthreachError):
    """No valid monitor matrix exists for the requested tightness."""


class SynthesisInfeasible(StealthreachError):
    """Every (a, b) grid point of the synthesis program is infeasible."""


class ReconstructionFailure(StealthreachError):
    """I - Y X is numerically singular; controller cannot be recovered."""


class SelectionFailed(StealthreachError):
    """No fully comparable row/subset available for selection."""
