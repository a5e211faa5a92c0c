from functools import lru_cache

import numpy as np
import pytest

from moebiusgeom.curves import CurveSpec, ExponentialKappa, ExpressionKappa, InverseSqrtKappa
from moebiusgeom.families import FamilyInstance, build_family

# name -> (family tag, params factory); curves are rebuilt per call so specs stay independent
FAMILY_TABLE = {
    "standard_cylinder": ("standard_cylinder", lambda: {"n": 3, "k": 1}),
    "standard_cylinder_n4k2": ("standard_cylinder", lambda: {"n": 4, "k": 2, "r": 1.5}),
    "standard_cone": ("standard_cone", lambda: {"n": 3, "k": 1, "r": 0.6}),
    "standard_torus": ("standard_torus", lambda: {"n": 3, "k": 1, "r": 0.6}),
    "standard_torus_n4k2": ("standard_torus", lambda: {"n": 4, "k": 2, "r": 0.5}),
    "circles_r12_l1": ("circles_product", lambda: {"radii": [1, 2], "lam": 1}),
    "circles_r11_l1": ("circles_product", lambda: {"radii": [1, 1], "lam": 1}),
    "circles_r12_l2": ("circles_product", lambda: {"radii": [1, 2], "lam": 2}),
    "circles_r123_l1": ("circles_product", lambda: {"radii": [1, 2, 3], "lam": 1}),
    "circles_r1234_l0": ("circles_product", lambda: {"radii": [1, 2, 3, 4], "lam": 0}),
    "log_spiral_cylinder": ("cylinder", lambda: {
        "n": 3, "curve": CurveSpec(0, ExponentialKappa(1.0, 1.0), (0.0, 1.0))}),
    "log_spiral_cylinder_p2": ("cylinder", lambda: {
        "n": 3, "curve": CurveSpec(0, ExponentialKappa(1.0, 1.0), (0.0, 1.0), p=2)}),
    "exp_cone": ("generalized_cone", lambda: {
        "n": 3, "curve": CurveSpec(1, ExponentialKappa(1.0, 0.5), (0.0, 1.0))}),
    "exp_rotational": ("rotational", lambda: {
        "n": 3, "curve": CurveSpec(-1, ExponentialKappa(1.0, 0.5), (0.0, 1.0))}),
    "inverse_sqrt_rotational": ("rotational", lambda: {
        "n": 3, "curve": CurveSpec(-1, InverseSqrtKappa(1.0, 1.0), (0.0, 1.0))}),
    "perturbed_cylinder": ("cylinder", lambda: {
        "n": 3, "curve": CurveSpec(0, ExpressionKappa("exp(s) + 0.1*s^2"), (0.0, 1.0))}),
}


@lru_cache(maxsize=None)
def family(name: str):
    tag, params = FAMILY_TABLE[name]
    return build_family(FamilyInstance(tag, params()))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


CRITERIA = range(1, 12)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for c in CRITERIA:
        parts = results.get(c)
        if not parts:
            terminalreporter.write_line(f"criterion {c:2d}: NOT RUN")
            continue
        ok = all(p[1] for p in parts)
        failed = [p[0] for p in parts if not p[1]]
        tail = f" (failing: {'; '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}{tail}")
