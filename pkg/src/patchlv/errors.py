"""Exception hierarchy shared by all patchlv modules."""


class PatchLVError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PatchLVError):
    """Malformed or schema-violating run configuration."""


class CapExceeded(PatchLVError):
    """Requested enumeration is larger than the configured cap."""


class NotStronglyConnected(PatchLVError):
    """Operation requires a strongly connected digraph."""


class NotComplete(PatchLVError):
    """Operation requires every off-diagonal weight to be positive."""


class NotCycleBalanced(PatchLVError):
    """Operation requires a cycle-balanced digraph."""


class PairSumNegative(PatchLVError):
    """Coupling table violates the pairwise nonnegativity hypothesis."""


class NotQuasiPositive(PatchLVError):
    """Matrix has a negative off-diagonal entry."""


class NonConvergence(PatchLVError):
    """Iterative solver exhausted its budget.

    Carries the best residual seen so the caller can report it.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SpectralBoundNotZero(PatchLVError):
    """Input matrix was expected to have spectral bound zero."""


class NewtonDiverged(PatchLVError):
    """Newton iteration failed to reach the residual target."""


class StepSizeTooLarge(PatchLVError):
    """Integrator detected blow-up or an unacceptable negativity clip."""


class ProportionalResource(PatchLVError):
    """Growth vector is proportional to the null eigenvector; thresholds undefined."""


class TiedResources(PatchLVError):
    """Some patch has identical growth rates for both species."""


class OneSidedResources(PatchLVError):
    """One species has no patch of resource advantage; dominance applies instead."""


class AssumptionViolated(PatchLVError):
    """Model assumptions required by the classifier do not hold."""


class StepSizeWarning(UserWarning):
    """Integrator clipped a negative component beyond tolerance and refined the step."""
