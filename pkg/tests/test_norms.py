import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowpde.errors import ValidationFault
from flowpde.lattice import SPACE_ONLY, Field, LatticeSpec
from flowpde.norms import c_gamma_norm, scale_norm, smoothed_sup

SPEC = LatticeSpec(1, 128, 0.1, 0.0, 0.5, 0.5)


def test_smoothed_sup_of_constant_is_exact():
    f = Field(SPEC, np.full(SPEC.n, 3.0), SPACE_ONLY)
    # constants pass through every K_mu unchanged (multiplier 1 at k = 0)
    for mu in (1.0, 0.1, 0.01):
        assert smoothed_sup(f, mu, g=2) == pytest.approx(3.0, rel=1e-12)


def test_smoothed_sup_decreases_with_smoothing():
    rng = np.random.default_rng(1)
    f = Field(SPEC, rng.standard_normal(SPEC.n), SPACE_ONLY)
    sups = [smoothed_sup(f, mu, g=2) for mu in (0.01, 0.1, 1.0)]
    assert sups[0] > sups[1] > sups[2]


def test_scale_norm_slope_recovers_single_mode():
    """A single Fourier mode is smooth: its smoothed sup is flat in mu until
    [mu] |k| ~ 1 and then decays, so the fitted slope over the resolvable
    window is <= 0 and the weighted sup is attained at the coarse end."""
    x = SPEC.coords()[0]
    f = Field(SPEC, np.cos(4 * x), SPACE_ONLY)
    rep = scale_norm(f, alpha=-0.5, g=2)
    assert rep.sup > 0
    assert np.all(rep.raw_norms <= 1.0 + 1e-12)
    rows = list(rep.rows())
    assert len(rows) == len(rep.mu_values)
    assert any(r["reliable"] for r in rows)


def test_scale_norm_white_noise_roughness():
    """Spatial white noise on the grid has norms growing as mu -> 0; the
    slope in [mu] of the smoothed sups is negative."""
    rng = np.random.default_rng(2)
    f = Field(SPEC, rng.standard_normal(SPEC.n) / np.sqrt(SPEC.dx), SPACE_ONLY)
    rep = scale_norm(f, alpha=-0.6, g=2)
    assert rep.slope < -0.2


def test_scale_norm_guards():
    f = Field(SPEC, np.zeros(SPEC.n), SPACE_ONLY)
    with pytest.raises(ValidationFault, match="too small"):
        scale_norm(f, alpha=-3.0, g=1)
    with pytest.raises(ValidationFault, match="resolution"):
        scale_norm(f, alpha=-0.5, g=2, mu_values=[1e-9])


def test_c_gamma_norm_mode_value():
    x = SPEC.coords()[0]
    f = Field(SPEC, np.cos(2 * x), SPACE_ONLY)
    gamma = 0.4
    assert c_gamma_norm(f, gamma) == pytest.approx(1.0 + 2.0**gamma, rel=1e-10)


def test_c_gamma_norm_guards():
    f = Field(SPEC, np.zeros(SPEC.n), SPACE_ONLY)
    with pytest.raises(ValidationFault):
        c_gamma_norm(f, -1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(-1.0, -0.1))
def test_scale_norm_is_positively_homogeneous(scale, alpha):
    rng = np.random.default_rng(5)
    f = Field(SPEC, rng.standard_normal(SPEC.n), SPACE_ONLY)
    g = Field(SPEC, scale * f.data, SPACE_ONLY)
    a = scale_norm(f, alpha, g=2)
    b = scale_norm(g, alpha, g=2)
    assert b.sup == pytest.approx(scale * a.sup, rel=1e-10)
