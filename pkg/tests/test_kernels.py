import numpy as np
import pytest

from nlheat.errors import ConfigError, ResolutionError
from nlheat.kernels import alpha, build_kernel, sample_on_grid, scaled_kernel, KernelSpec

# frozen from the >=10x refinement oracle below
M2_BUMP_1D = 0.15811363626379826


def midpoint_quad(kernel, n, weight=None):
    """Independent composite-midpoint quadrature over the support."""
    d, N = kernel.d, kernel.N
    h = 2.0 * d / n
    x = -d + (np.arange(n) + 0.5) * h
    if N == 1:
        pts = x
        r2 = x * x
        vol = h
    else:
        gx, gy = np.meshgrid(x, x, indexing="ij")
        pts = np.stack([gx, gy], axis=-1)
        r2 = gx * gx + gy * gy
        vol = h * h
    vals = kernel.evaluate(pts)
    w = np.ones_like(r2) if weight is None else weight(r2)
    return float(np.sum(vals * w) * vol)


@pytest.mark.parametrize("N", [1, 2])
def test_unit_mass(N):
    k = build_kernel("bump", d=1.0, N=N, quad_resolution=256)
    assert abs(midpoint_quad(k, 2560) - 1.0) < 1e-10


@pytest.mark.parametrize("N", [1, 2])
def test_even_symmetry_exact(N, rng):
    k = build_kernel("bump", d=1.0, N=N)
    if N == 1:
        x = rng.uniform(-1.2, 1.2, size=64)
        assert np.array_equal(k.evaluate(x), k.evaluate(-x))
    else:
        x = rng.uniform(-1.2, 1.2, size=(64, 2))
        assert np.array_equal(k.evaluate(x), k.evaluate(-x))


def test_positive_inside_zero_outside():
    # positivity holds up to the float underflow radius of the bump exponent
    k = build_kernel("bump", d=0.5, N=1)
    r_in = np.linspace(0, 0.999 * 0.5, 100)
    assert np.all(k.evaluate_radial(r_in) > 0)
    assert np.all(k.evaluate_radial(np.array([0.5, 0.75, 2.0])) == 0.0)


def test_m2_matches_refinement_oracle():
    k = build_kernel("bump", d=1.0, N=1, quad_resolution=256)
    mass = midpoint_quad(k, 2560)
    m2 = midpoint_quad(k, 2560, weight=lambda r2: r2) / mass
    assert abs(k.m2 - m2) < 1e-8
    assert abs(k.m2 - M2_BUMP_1D) < 1e-9


def test_first_moment_vanishes():
    k = build_kernel("bump", d=1.0, N=1)
    n = 2001
    h = 2.0 / n
    x = -1.0 + (np.arange(n) + 0.5) * h
    assert abs(np.sum(k.evaluate(x) * x) * h) < 1e-12


def test_second_moment_bounds():
    for d in (0.5, 1.0, 3.0):
        k = build_kernel("bump", d=d, N=1)
        assert 0 < k.m2 < d * d


def test_alpha_definition_and_scaling():
    k1 = build_kernel("bump", d=1.0, N=1)
    assert alpha(k1) == k1.m2 / 2.0
    k2 = build_kernel("bump", d=2.0, N=1)
    assert abs(alpha(k2) / alpha(k1) - 4.0) < 1e-12
    hypothetical = KernelSpec(family="bump", d=1.0, N=1, c=1.0, m2=2.0,
                              quad_resolution=64)
    assert alpha(hypothetical) == 1.0


def test_scaled_kernel_identity_and_support():
    k = build_kernel("bump", d=1.0, N=1)
    assert scaled_kernel(k, 1.0) == k
    k2 = scaled_kernel(k, 2.0)
    assert k2.d == 0.5
    assert abs(k2.m2 - k.m2 / 4.0) < 1e-14


def test_scaled_kernel_quadrature_oracle():
    k = build_kernel("bump", d=1.0, N=1)
    k2 = scaled_kernel(k, 2.0)
    mass = midpoint_quad(k2, 2560)
    m2 = midpoint_quad(k2, 2560, weight=lambda r2: r2)
    assert abs(mass - 1.0) < 1e-10
    assert abs(m2 - k.m2 / 4.0) < 1e-10


def test_scaled_kernel_rejects_nonpositive():
    k = build_kernel("bump", d=1.0, N=1)
    with pytest.raises(ValueError):
        scaled_kernel(k, 0.0)
    with pytest.raises(ValueError):
        scaled_kernel(k, -1.0)


@pytest.mark.parametrize("N", [1, 2])
def test_stencil_renormalized_and_symmetric(N):
    k = build_kernel("bump", d=1.0, N=N)
    s = sample_on_grid(k, 0.125)
    assert abs(np.sum(s.values) * s.h**N - 1.0) < 1e-14
    flipped = s.values[::-1] if N == 1 else s.values[::-1, ::-1]
    assert np.array_equal(s.values, flipped)


def test_stencil_moment_refinement():
    # discrete second moment converges at least quadratically under halving
    k = build_kernel("bump", d=1.0, N=1)
    errs = [abs(sample_on_grid(k, h).second_moment() - k.m2)
            for h in (0.25, 0.125, 0.0625)]
    for e_coarse, e_fine in zip(errs, errs[1:]):
        assert e_fine <= e_coarse / 3.5 or e_fine < 1e-12
    # frozen regression bound |err| <= C h^2
    for h, e in zip((0.25, 0.125, 0.0625), errs):
        assert e <= 0.1 * h * h


def test_stencil_resolution_guard():
    k = build_kernel("bump", d=1.0, N=1)
    with pytest.raises(ResolutionError):
        sample_on_grid(k, 0.3)
    sample_on_grid(k, 0.25)  # exactly d/4 is admissible


def test_build_kernel_rejects_bad_config():
    with pytest.raises(ConfigError):
        build_kernel("box", d=1.0, N=1)
    with pytest.raises(ConfigError):
        build_kernel("bump", d=1.0, N=3)
    with pytest.raises(ConfigError):
        build_kernel("bump", d=-1.0, N=1)
    with pytest.raises(ConfigError):
        build_kernel("bump", d=1.0, N=1, quad_resolution=32)
