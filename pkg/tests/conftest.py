import math

import numpy as np
import pytest

import nlheat as nl
from nlheat.evolve import checkpoint_schedule

# scenario shared by the decay/barrier/convergence/mass acceptance criteria:
# 1D bump datum on a truncated box, p = 1.5
ACC_P = 1.5
ACC_SNAPSHOTS = (1.0, 4.0, 16.0, 10.0, 20.0, 40.0, 80.0)


@pytest.fixture(scope="session")
def kernel1d():
    return nl.build_kernel("bump", d=1.0, N=1, quad_resolution=256)


@pytest.fixture(scope="session")
def kernel2d():
    return nl.build_kernel("bump", d=1.0, N=2, quad_resolution=256)


@pytest.fixture(scope="session")
def alpha1d(kernel1d):
    return nl.alpha(kernel1d)


@pytest.fixture(scope="session")
def vss_profile(kernel1d, alpha1d):
    return nl.shoot_vss(ACC_P, 1, alpha1d, bisect_tol=1e-10)


@pytest.fixture(scope="session")
def ua_profile(kernel1d, alpha1d, vss_profile):
    return nl.shoot_UA(1.0, ACC_P, 1, alpha1d, a_star=vss_profile.a0)


@pytest.fixture(scope="session")
def bump_run_long(kernel1d):
    """The long absorption-dominated run: datum near the limit-profile shape,
    snapshots at every checkpoint so barrier domination can be checked."""
    grid = nl.Grid(N=1, L=40.0, h=0.05, mode="truncated")
    probe = nl.EvolveParams(p=ACC_P, dt=1e-3, t_end=100.0, checkpoint_first=0.1,
                            checkpoint_ratio=math.sqrt(2.0),
                            snapshot_times=ACC_SNAPSHOTS)
    all_times = tuple(sorted(set(checkpoint_schedule(probe)) | set(ACC_SNAPSHOTS)))
    params = nl.EvolveParams(p=ACC_P, dt=1e-3, t_end=100.0, checkpoint_first=0.1,
                             checkpoint_ratio=math.sqrt(2.0),
                             snapshot_times=all_times)
    datum = nl.CompactBump(amplitude=3.2, radius=1.0)
    return {"traj": nl.run(datum, kernel1d, grid, params),
            "datum": datum, "grid": grid, "params": params}


@pytest.fixture(scope="session")
def powertail_run(kernel1d):
    grid = nl.Grid(N=1, L=40.0, h=0.05, mode="truncated")
    params = nl.EvolveParams(p=ACC_P, dt=1e-3, t_end=80.0, checkpoint_first=0.1,
                             checkpoint_ratio=2.0,
                             snapshot_times=(10.0, 20.0, 40.0, 80.0))
    return nl.run(nl.PowerTailDatum(A=1.0, p=ACC_P), kernel1d, grid, params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
