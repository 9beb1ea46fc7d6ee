"""Exception and warning types shared across the package."""


class EvtobsError(Exception):
    """Base class for all library errors."""


class NotSymmetricError(EvtobsError, ValueError):
    """Adjacency matrix is not symmetric."""


class NonzeroDiagonalError(EvtobsError, ValueError):
    """Adjacency matrix has self-loop weights on its diagonal."""


class DisconnectedError(EvtobsError, ValueError):
    """Communication graph is not connected."""


class NotPositiveDefiniteError(EvtobsError, ArithmeticError):
    """A matrix required to be positive definite is not."""


class SchurFailureError(EvtobsError, ArithmeticError):
    """Schur decomposition did not converge."""


class JointUndetectableError(EvtobsError, ValueError):
    """The stacked measurement model cannot reconstruct the full state."""


class UnplaceableError(EvtobsError, ArithmeticError):
    """Requested observer poles cannot be assigned for this pair."""


class BadPoleSetError(EvtobsError, ValueError):
    """Desired pole set is malformed (count, conjugacy, or stability)."""


class NotHurwitzError(EvtobsError, ValueError):
    """Matrix expected to be Hurwitz has an eigenvalue with Re >= 0."""


class BadEpsilonError(EvtobsError, ValueError):
    """Edge coupling margin epsilon lies outside (0, 1/2)."""


class NonpositiveCoefficientError(EvtobsError, ValueError):
    """Inter-event bound requires strictly positive coefficients."""


class RhoNonPositiveError(EvtobsError, ArithmeticError):
    """A dynamic trigger variable became nonpositive during integration."""


class NonFiniteError(EvtobsError, ArithmeticError):
    """Simulation state diverged to non-finite values."""


class ConfigInvalidError(EvtobsError, ValueError):
    """Simulation configuration violates an invariant."""


class ParseError(EvtobsError, ValueError):
    """Scenario file could not be parsed."""


class ValidationError(ConfigInvalidError):
    """Scenario file parsed but a field violates its constraints."""


class BorderlineEigenvalueWarning(UserWarning):
    """Eigenvalue too close to the half-plane boundary to classify reliably."""


class CouplingGainWarning(UserWarning):
    """Supplied coupling gain is below the sufficient lower bound."""
