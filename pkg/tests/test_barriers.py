import math

import numpy as np
import pytest

from scl import barriers as bar, gw
from scl.errors import BudgetExceeded, DomainError, ShapeMismatch
from scl.rng import stream


def test_rho_example():
    assert bar.rho(100) == pytest.approx(1.9769741490700607, abs=1e-12)


def test_t_z_and_s_L():
    L = 17
    assert bar.t_z(L, 0.0) == pytest.approx((bar.rho(L) * L) ** 2 / 2.0)
    # exact algebra: t_{L,0} - s_L(0) = (log L)^2 / 8
    for L in (5, 12, 100, 1000):
        gap = bar.t_z(L, 0.0) - bar.s_L(L, 0.0)
        assert gap == pytest.approx(math.log(L) ** 2 / 8.0, rel=1e-10)


def test_alpha_ends_at_zero():
    for L in (4, 9, 30):
        assert bar.alpha(L, L) == 0.0
        assert bar.gamma_curve(L, L) == 0.0
        assert bar.alpha(1, L) == pytest.approx(bar.rho(L) * (L - 1) - 1.0)


def test_m_eps_and_c_star():
    eps = 0.01
    le = math.log(1.0 / eps)
    assert bar.m_eps(eps) == pytest.approx(2.0 * math.sqrt(2.0) * (le - 0.25 * math.log(le)))
    assert bar.c_star_plane(2.0) == pytest.approx(2.0 * math.sqrt(2.0))


def test_constants_bundle():
    c = bar.constants(10, 1.0, eps=0.05, R=1.5)
    assert c.rho_L == bar.rho(10)
    assert c.t_z == bar.t_z(10, 1.0)
    assert c.s_L_z == bar.s_L(10, 1.0)
    assert c.c_star_sphere == pytest.approx(2.0 * math.sqrt(2.0))
    assert c.c_star_plane == pytest.approx(1.5 * math.sqrt(2.0))


def test_b_bound_theta_cancels_quadratic():
    L, z = 12, 1.5
    for l in (2, 5, 6):
        g = bar.l_L(l, L) ** bar.ALPHA_GAMMA
        val = bar.b_bound(l, L, z, z + g)
        assert val == pytest.approx(L ** (l / L) * math.exp(-2.0 * l), rel=1e-12)


def test_b_bound_monotone_in_z():
    L = 16
    l = L // 2
    vals = [bar.b_bound(l, L, z, 0.0) for z in np.linspace(0.0, 3.0, 13)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_N_ka():
    for L in (10, 20):
        assert bar.N_ka(L, 0.0, L) == 0
        vals = [bar.N_ka(L // 2, a, L) for a in range(5)]
        assert all(x < y for x, y in zip(vals, vals[1:]))
    assert bar.N_ka(10, 3.0, 20) == int(
        math.floor((bar.rho(20) * 10 + 4.0) ** 2 / 2.0)
    )


def test_window_count_range():
    lo, hi = bar.window_count_range(2.0)
    # sqrt(2T) in [2, 3) <=> T in [2, 4.5) <=> T in {2, 3, 4}
    assert (lo, hi) == (2, 5)
    lo, hi = bar.window_count_range(0.0)
    assert lo == 0 and hi == 1


def test_barrier_dp_reduces_to_extinction():
    ev = bar.BarrierEvent(
        start=37, curve=bar.BarrierCurve("none", 9), level_start=1, level_end=9
    )
    p = bar.barrier_prob_dp(ev)
    assert p == pytest.approx(gw.extinction_prob(37, 8), abs=1e-12)


def test_barrier_dp_blocked_is_zero():
    ev = bar.BarrierEvent(
        start=3, curve=bar.BarrierCurve("gamma_lower", 30), level_start=1, level_end=5
    )
    assert bar.barrier_prob_dp(ev) == 0.0


def test_barrier_dp_monotone_in_barrier():
    # raising the barrier (alpha -> gamma) never increases the probability
    L, z = 8, 0.5
    p_alpha = bar.barrier_prob_dp(
        bar.BarrierEvent(
            start=int(round(bar.t_z(L, z))), curve=bar.BarrierCurve("alpha_lower", L),
            level_start=1, level_end=L,
        )
    )
    p_lin = bar.barrier_prob_dp(
        bar.BarrierEvent(
            start=int(round(bar.t_z(L, z))), curve=bar.BarrierCurve("linear", L),
            level_start=1, level_end=L,
        )
    )
    p_gamma = bar.barrier_prob_dp(bar.event_gamma_extinction(L, z))
    assert p_alpha >= p_lin >= p_gamma


def test_barrier_dp_vs_mc():
    ev = bar.BarrierEvent(
        start=int(round(bar.t_z(8, 0.0))),
        curve=bar.BarrierCurve("alpha_lower", 8),
        level_start=1, level_end=3, window=bar.alpha(3, 8) + 3.0,
    )
    p_dp = bar.barrier_prob_dp(ev)
    p_mc, se = bar.barrier_prob_mc(ev, 60_000, stream(11, 0))
    assert abs(p_mc - p_dp) <= 3.5 * max(se, 1e-9)


def test_event_builders_and_bounds():
    ev = bar.event_gamma_extinction(10, 1.0)
    out = bar.asymptotic_bounds(ev)
    z = ev.shape_params["z"]
    assert out["bound"] == pytest.approx(
        (1.0 + z) * math.exp(-20.0 - 2.0 * z - z * z / 40.0), rel=1e-12
    )
    ev = bar.event_alpha_window(12, 0.0, k=6, j=1.0)
    assert bar.asymptotic_bounds(ev)["shape"] == "alpha_window"
    ev = bar.event_linear_extinction(12, k=6, j=0.5)
    assert bar.asymptotic_bounds(ev)["shape"] == "linear_extinction"
    ev = bar.event_linear_window(12, k=3, ktilde=6, u=1.0, j=1.0)
    assert bar.asymptotic_bounds(ev)["shape"] == "linear_window"


def test_shape_mismatch():
    ev = bar.BarrierEvent(
        start=5, curve=bar.BarrierCurve("none", 5), level_start=1, level_end=4
    )
    with pytest.raises(ShapeMismatch):
        bar.asymptotic_bounds(ev)


def test_dp_budget():
    with pytest.raises(BudgetExceeded):
        bar.barrier_prob_dp(
            bar.BarrierEvent(
                start=10**7, curve=bar.BarrierCurve("none", 5),
                level_start=1, level_end=3,
            ),
            state_budget=10**6,
        )


def test_domain_errors():
    with pytest.raises(DomainError):
        bar.rho(1)
    with pytest.raises(DomainError):
        bar.event_gamma_extinction(10, -0.5)
    with pytest.raises(DomainError):
        bar.event_alpha_window(10, 0.0, k=1, j=0.0)
    with pytest.raises(DomainError):
        bar.m_eps(0.9)


def test_deviation_envelope_regime_split():
    # within the stated regime the envelope dominates with a modest constant
    L, z = 14, 0.0
    t_int, z_eff = bar._int_t_z(L, z)
    for l in (2, 4, 7):
        al = bar.alpha(l, L)
        assert (al + 1.0) ** 2 / 2.0 <= bar.t_z(L, z)
        d = gw.generation_dist(t_int, l - 1, lost_mass_bound=1e-9)
        cut = np.sqrt(2.0 * np.arange(len(d.probs)))
        p = float(d.probs[cut <= al + 1.0].sum())
        assert p <= 10.0 * bar.b_bound(l, L, z_eff, 1.0)
