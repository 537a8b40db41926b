"""Exception taxonomy shared by all modules."""


class NcConvexError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(NcConvexError):
    """Matrix shapes are incompatible with the requested operation."""


class SignViolation(NcConvexError):
    """A matrix does not carry its declared transpose symmetry."""


class DependentGenerators(NcConvexError):
    """The generators together with the identity are linearly dependent."""


class NotWBalanced(NcConvexError):
    """A doubled-size matrix is not invariant under the W-conjugation."""


class SystemMismatch(NcConvexError):
    """Points do not belong to a common operator system."""


class NotPartitionOfUnity(NcConvexError):
    """Combination coefficients do not sum to the identity."""


class MaxIterations(NcConvexError):
    """The solver reached its iteration cap without a verdict."""

    def __init__(self, message, gap=None, iterations=None):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations


class Unbounded(NcConvexError):
    """Bracket expansion for a linear objective exceeded its bound."""


class InconsistentDimension(NcConvexError):
    """A commutant dimension count contradicts the division-algebra table."""


class GenericityFailure(NcConvexError):
    """Random generic elements repeatedly failed to split an algebra."""


class RankDecisionFailure(NcConvexError):
    """A numerical rank decision had no usable spectral gap."""


class CrossCheckMismatch(NcConvexError):
    """Two independent computation routes disagree."""

    def __init__(self, message, first=None, second=None):
        super().__init__(message)
        self.first = first
        self.second = second


class IndeterminateNearBoundary(NcConvexError):
    """A verdict fell inside the indeterminate band around its threshold."""


class MinorantViolated(NcConvexError):
    """A candidate affine minorant exceeds the function at a sample."""


class IndexOutOfRange(NcConvexError):
    """A word references a generator index the system does not have."""


class InfeasibleBarycenter(NcConvexError):
    """No representing map with the requested barycenter exists."""


class UnknownFixture(NcConvexError):
    """Requested fixture name is not shipped."""


class NotAMember(NcConvexError):
    """A point failed the membership precondition of an operation."""
