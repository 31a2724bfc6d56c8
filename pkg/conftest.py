import pytest

from conegeom.geometry.cone import ArcDomain, CapDomain, build_cone
from conegeom.geometry.quadrature import build_rule
from conegeom.geometry.surfaces import build_polar_graph, build_profile, spherical_sector

# --- Desk resolutions ---
N_PHI = 64
N_S = 32
N_B = 128

CONVEX_ALPHA = 1.2
NONCONVEX_ALPHA = 2.0


def desk_rule(surface, n_phi: int = N_PHI, n_s: int = N_S, n_b: int = N_B, level: int = 0):
    return build_rule(surface.domain, n_phi, n_s, n_b, level=level)


def graph(alpha: float, family: str, **params):
    return build_polar_graph(build_cone(CapDomain(alpha)), build_profile(family, **params))


# --- Cones ---


@pytest.fixture(scope="session")
def convex_cone():
    return build_cone(CapDomain(CONVEX_ALPHA))


@pytest.fixture(scope="session")
def nonconvex_cone():
    return build_cone(CapDomain(NONCONVEX_ALPHA))


@pytest.fixture(scope="session")
def wedge_cone():
    return build_cone(ArcDomain.wedge(1.0))


# --- Surfaces ---


@pytest.fixture(scope="session")
def convex_sector(convex_cone):
    return spherical_sector(convex_cone, 1.0)


@pytest.fixture(scope="session")
def nonconvex_sector(nonconvex_cone):
    return spherical_sector(nonconvex_cone, 1.0)


@pytest.fixture(scope="session")
def convex_bump(convex_cone):
    return build_polar_graph(convex_cone, build_profile("bump", R=1.0, eps=0.1, k=2))


@pytest.fixture(scope="session")
def nonconvex_bump(nonconvex_cone):
    return build_polar_graph(nonconvex_cone, build_profile("bump", R=1.0, eps=0.1, k=2))


@pytest.fixture(scope="session")
def linear_violation(convex_cone):
    return build_polar_graph(convex_cone, build_profile("linear_violation", R=1.0, eps=0.1))


@pytest.fixture(scope="session")
def wedge_graph(wedge_cone):
    return build_polar_graph(wedge_cone, build_profile("axisym", R=1.0, eps=0.1))
