"""Exception hierarchy shared by all modules."""


class GeometryError(Exception):
    """Base class for every error raised by moebiusgeom."""


class PointOutsideDomainError(GeometryError):
    pass


class NonFiniteError(GeometryError):
    """A chart or field produced inf/nan; carries the chart name and point."""


class InvalidStepError(GeometryError):
    pass


class DegenerateMetricError(GeometryError):
    pass


class RankDeficiencyError(GeometryError):
    pass


class UmbilicPointError(GeometryError):
    pass


class PoleHitError(GeometryError):
    pass


class HyperbolicDomainError(GeometryError):
    pass


class InvalidDimensionsError(GeometryError):
    pass


class NonCommutingError(GeometryError):
    """Shape operators do not commute: the normal bundle is not flat."""


class ClusterAmbiguityError(GeometryError):
    pass


class CrossCheckError(GeometryError):
    """Two independent computations of the same tensor disagree."""


class ConstraintDriftError(GeometryError):
    pass


class KappaDomainError(GeometryError):
    pass


class VerdictDisagreementError(GeometryError):
    pass


class ConfigError(GeometryError):
    pass
