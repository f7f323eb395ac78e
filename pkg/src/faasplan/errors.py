"""Domain errors shared across the planner.

The CLI maps these onto process exit codes, so keep the hierarchy flat
and the names descriptive.
"""


class FaasplanError(Exception):
    """Base class for all planner errors."""


class InsufficientMemory(FaasplanError):
    """Container memory is below the function's reference footprint."""


class DoesNotFitCluster(FaasplanError):
    """A single replica of the container fits on no cluster node."""


class PackingFailed(FaasplanError):
    """Replica placement onto cluster nodes failed (first-fit-decreasing)."""


class TooLarge(FaasplanError):
    """Graph exceeds the size budget of the exact edit-distance search."""


class DuplicateId(FaasplanError):
    """An identifier was registered twice."""


class EmptyRegistry(FaasplanError):
    """Lookup attempted against a registry with no entries."""


class NoSimilarPipeline(FaasplanError):
    """No registered pipeline lies within the similarity threshold.

    Callers usually treat this as a signal to fall back to from-scratch
    provisioning rather than as a hard failure.
    """


class DegenerateDataset(FaasplanError):
    """Training data that cannot support learning (e.g. a single label)."""


class DimensionMismatch(FaasplanError):
    """Model weights and inputs disagree on shape."""


class NoFeasibleConfiguration(FaasplanError):
    """No configuration in the catalog satisfies the SLO on the cluster."""


class ZeroBaseline(FaasplanError):
    """Relative saving requested against a zero-cost baseline."""
