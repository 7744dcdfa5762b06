import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inls import diagnostics as dg
from inls.dynamics import (BLOWUP, COMPLETED, HORIZON, Monitors, evolve, nonlinear_phase_step,
                           rk4_reference_step, rk4_stable_dt, scaling_transform, strang_step)
from inls.errors import ConfigurationError, OracleStabilityError, ParameterError
from inls.grid import ComplexField, integrate, make_grid
from inls.initial import band_limited_random, gaussian
from inls.linear import free_evolve
from inls.model import ModelParams, potential_weight

P = ModelParams(3, 2.5, 0.5)


@pytest.fixture(scope="module")
def g3():
    return make_grid(3, 16, 4.0)


def _random(grid, seed):
    rng = np.random.default_rng(seed)
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def test_phase_step_fixed_points(g3):
    w = potential_weight(g3, P.b)
    assert np.all(nonlinear_phase_step(g3.zeros(), w, P, 0.1).values == 0)
    u = _random(g3, 1)
    assert np.array_equal(nonlinear_phase_step(u, w, P, 0.0).values, u.values)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), dt=st.floats(1e-4, 1.0))
def test_phase_step_preserves_modulus(seed, dt):
    g = make_grid(3, 8, 2.0)
    u = _random(g, seed)
    out = nonlinear_phase_step(u, potential_weight(g, P.b), P, dt)
    assert np.allclose(np.abs(out.values), np.abs(u.values), rtol=1e-13, atol=0)


def test_strang_without_coupling_is_free_flow(g3):
    u = gaussian(g3, 1.0, 0.8, velocity=(1.0, 0.0, 0.5))
    w0 = potential_weight(g3, P.b, coupling=0.0)
    out = strang_step(u, w0, P, 0.05)
    assert np.abs(out.values - free_evolve(u, 0.05).values).max() < 1e-13


def test_strang_dt_zero(g3):
    u = _random(g3, 2)
    assert np.array_equal(strang_step(u, potential_weight(g3, P.b), P, 0.0).values, u.values)


def test_strang_local_error_third_order():
    g = make_grid(3, 32, 8.0)
    w = potential_weight(g, P.b)
    u = gaussian(g, 1.5, 1.0)
    gaps = []
    for dt in (0.02, 0.01, 0.005):
        one = strang_step(u, w, P, dt).values
        two = strang_step(strang_step(u, w, P, dt / 2), w, P, dt / 2).values
        gaps.append(math.sqrt(integrate(np.abs(one - two) ** 2, g)))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all((ratios > 7.0) & (ratios < 9.0))


def test_fused_stepping_matches_strang_steps():
    g = make_grid(3, 16, 6.0)
    u0 = gaussian(g, 1.0, 1.2)
    w = potential_weight(g, P.b)
    u = u0
    for _ in range(7):
        u = strang_step(u, w, P, 0.01)
    out = evolve(u0, P, 0.01, 0.07, log_every=3, monitors=Monitors(wrap_tol=None))
    assert np.abs(out.final.values - u.values).max() < 1e-13
    assert out.times == pytest.approx([0.0, 0.03, 0.06, 0.07])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_strang_overflow():
    from inls.errors import NumericalOverflowError
    g = make_grid(1, 8, 2.0)
    bad = ComplexField(g, np.full(8, 1e200 + 0j))
    with pytest.raises(NumericalOverflowError):
        strang_step(bad, potential_weight(g, 0.0), ModelParams(1, 3, 0, True), 1.0)


def test_rk4_plane_wave_fifth_order_local():
    g = make_grid(1, 16, math.pi)
    params = ModelParams(1, 3.0, 0.0, validation=True)
    w0 = potential_weight(g, 0.0, coupling=0.0)
    u = ComplexField(g, np.exp(3j * g.nodes_1d()))
    errs = []
    for dt in (0.02, 0.01):
        out = rk4_reference_step(u, w0, params, dt).values
        errs.append(np.abs(out - np.exp(-9j * dt) * u.values).max())
    assert 28 < errs[0] / errs[1] < 36


def test_rk4_dt_zero_and_instability(g3):
    w = potential_weight(g3, P.b)
    u = gaussian(g3, 1.0, 1.0)
    assert np.array_equal(rk4_reference_step(u, w, P, 0.0).values, u.values)
    rough = _random(g3, 3)
    with pytest.raises(OracleStabilityError):
        for _ in range(5):
            rough = rk4_reference_step(rough, w, P, 20 * rk4_stable_dt(g3))


def test_scaling_transform():
    g = make_grid(3, 32, 8.0)
    u = gaussian(g, 1.0, 1.0)
    assert np.array_equal(scaling_transform(u, P, 1.0).values, u.values)
    lam = 2.0
    v = scaling_transform(u, P, lam)
    assert v.grid.half_width == 4.0
    expect = lam ** (2 * P.scaling_exponent - 3) * dg.mass(u)
    assert dg.mass(v) == pytest.approx(expect, rel=1e-12)
    # homogeneous norms scale like lam^(s - s_c): checked at s = 0 above and s = 1 here
    assert dg.grad_norm(v) == pytest.approx(lam ** (1 - P.s_c) * dg.grad_norm(u), rel=1e-12)
    with pytest.raises(ParameterError):
        scaling_transform(u, P, 0.0)


def test_evolve_zero_data():
    g = make_grid(3, 16, 4.0)
    out = evolve(g.zeros(), P, 0.01, 0.1, log_every=5, monitors=Monitors(virial_R=2.0, radii=(1.0,)))
    assert out.status == COMPLETED
    for name in ("mass", "energy", "kinetic", "potential", "Z", "dZdt_rhs", "grad_norm"):
        assert np.all(out.series(name) == 0)


def test_small_gaussian_mass_drift():
    g = make_grid(3, 32, 8.0)
    out = evolve(gaussian(g, 0.01, 1.0), P, 0.01, 5.0, log_every=50,
                 monitors=Monitors(wrap_tol=None))
    M = out.series("mass")
    assert np.max(np.abs(M - M[0])) / M[0] <= 1e-10


def test_evolve_horizon_guard():
    g = make_grid(3, 16, 4.0)
    out = evolve(gaussian(g, 0.1, 1.0), P, 0.01, 2.0, log_every=10)
    assert out.status == HORIZON
    assert out.times[-1] < 2.0


def test_evolve_blowup_guard():
    g = make_grid(3, 32, 4.0)
    out = evolve(gaussian(g, 4.0, 1.0), P, 2e-4, 0.2, log_every=10,
                 monitors=Monitors(blowup_factor=1.5, wrap_tol=None))
    assert out.status == BLOWUP
    assert out.records[-1].grad_norm > 1.5 * out.records[0].grad_norm


def test_evolve_config_errors():
    g = make_grid(3, 16, 4.0)
    with pytest.raises(ConfigurationError):
        evolve(g.zeros(), P, 0.03, 0.1)
    with pytest.raises(ConfigurationError):
        evolve(g.zeros(), P, -0.01, 0.1)
    with pytest.raises(ConfigurationError):
        evolve(make_grid(2, 16, 4.0).zeros(), P, 0.01, 0.1)


def test_observer_and_fd_virial():
    g = make_grid(3, 32, 8.0)
    vw = dg.build_virial_weight(g, 2.0)
    seen = []
    out = evolve(gaussian(g, 0.5, 1.0, velocity=(0.5, 0, 0)), P, 1e-3, 0.02, log_every=10,
                 monitors=Monitors(virial_R=2.0, virial_fd=True, wrap_tol=None),
                 observer=lambda rec, f: seen.append(
                     (rec.t, dg.semidiscrete_virial_rate(f, vw, P)["total"])))
    assert [t for t, _ in seen] == pytest.approx(out.times)
    fd = out.series("dZdt_fd")
    assert math.isnan(fd[0]) and math.isnan(fd[-1]) and np.isfinite(fd[1])
    assert fd[1] == pytest.approx(seen[1][1], rel=1e-4)


def test_keep_fields():
    g = make_grid(3, 16, 4.0)
    out = evolve(band_limited_random(g, 2.0, 0, 0.1), P, 0.01, 0.02, log_every=1,
                 monitors=Monitors(keep_fields=True, wrap_tol=None))
    assert len(out.fields) == 3
    assert np.array_equal(out.fields[-1].values, out.final.values)
