"""Moebius invariants of chart-parametrized submanifolds of Euclidean space."""

__version__ = "0.1.0"

from .config import RunConfig, build_spec, parse_config, sample_points
from .curves import (
    CurveSpec,
    ExponentialKappa,
    ExpressionKappa,
    InverseSqrtKappa,
    closed_form_kappa,
    integrate_curve,
    ode_residual,
)
from .errors import ConfigError, GeometryError
from .families import FAMILIES, FamilyInstance, build_family, list_families
from .geometry import apply_conformal_map, extrinsic_data
from .jets import ImmersionSpec, jet_eval
from .moebius import (
    blaschke_tensor,
    moebius_form,
    moebius_metric,
    moebius_sff,
    principal_normals,
    shape_operators,
)
from .pipeline import PointAnalysis, analyze
from .verify import (
    ResidualReport,
    check_classify,
    check_codazzi,
    check_gauss,
    check_identities,
    check_ode,
    check_parallel,
    check_ricci,
    check_semiparallel,
    sample_grid,
    sample_random,
)
