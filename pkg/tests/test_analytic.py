"""Closed-form layer: frozen reference values, brute-force cross-checks,
and algebraic identities as properties."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracle
from squeezecount import (
    DegenerateNoiseError,
    DeviceParams,
    InputState,
    analytic,
)

ns_floats = st.floats(min_value=0.05, max_value=4.0)
a2_floats = st.floats(min_value=0.0, max_value=30.0)
n_ints = st.integers(min_value=0, max_value=8)


# ---------------------------------------------------------------------------
# frozen values (computed once with the brute-force routes in oracle.py)

def test_tmsv_reference_values():
    p = DeviceParams(ns=2.0, nalpha=0.0)
    assert analytic.correlation_signal(p, 0) == 10.0
    assert analytic.correlation_variance(p, 0) == 630.0
    assert analytic.g12(p, 0) == 2.5
    assert analytic.snr(p, 0) == 0.3984095364447979
    assert analytic.second_moments(p, 0) == (10.0, 10.0)


def test_working_point_reference_values():
    p = DeviceParams(ns=2.0, nalpha=1.0)
    assert analytic.intensities(p, 1) == (7.0, 7.0, 0.0)
    assert analytic.correlation_signal(p, 1) == 85.0
    lossy = p.replace(eta1=0.5, eta2=0.5)
    assert analytic.correlation_signal_lossy(lossy, 1) == 21.25


def test_step_size_reference_value():
    assert analytic.step_size(DeviceParams(ns=2.0, nalpha=0.0), 0) == 22.0


def test_thermal_input_reference_value():
    p = DeviceParams(ns=2.0, nalpha=1.0)
    m = analytic.channel_moments(p, InputState.thermal(1.0))
    assert m["nanb"] == 97.0


def test_dark_mean_reference_value():
    assert analytic.dark_mean(9.7e-6, 300.0) == pytest.approx(
        0.007175371894023626, rel=1e-12)


def test_confidence_z_reference_value():
    assert analytic.confidence_z(0.95) == pytest.approx(1.959963984540054, rel=1e-12)


def test_optimum_alpha_budget_split():
    assert analytic.optimum_alpha(2.0, 0, 4.0) == 2.0


# ---------------------------------------------------------------------------
# brute force: the polynomials against a literal matrix-exponential squeezer

BRUTE_CASES = [(0.5, 1.0, 1), (1.0, 2.0, 2), (2.0, 1.0, 1), (2.0, 4.0, 3)]


@pytest.mark.parametrize("ns,a2,N", BRUTE_CASES)
def test_closed_forms_against_expm(ns, a2, N):
    p = DeviceParams(ns=ns, nalpha=a2)
    mean = ns * (a2 + N) + max(N, a2) + ns
    c = int(mean + 12 * math.sqrt(mean + 1) + 45)
    out = oracle.squeeze_expm(oracle.fock_coherent(N, math.sqrt(a2), c, c),
                              math.asinh(math.sqrt(ns)))
    mm = oracle.state_moments(out)
    # the Krylov exponential carries ~1e-8 relative rounding at these sizes;
    # 1e-7 / 1e-6 still flags any wrong polynomial coefficient (the smallest
    # term is >1e-3 of each total)
    na, nb, _ = analytic.intensities(p, N)
    assert mm["na"] == pytest.approx(na, rel=1e-7)
    assert mm["nb"] == pytest.approx(nb, rel=1e-7)
    assert mm["nanb"] == pytest.approx(analytic.correlation_signal(p, N), rel=1e-7)
    var = mm["na2nb2"] - mm["nanb"] ** 2
    assert var == pytest.approx(analytic.correlation_variance(p, N), rel=1e-5)
    s2a, s2b = analytic.second_moments(p, N)
    assert mm["na2"] == pytest.approx(s2a, rel=1e-7)
    assert mm["nb2"] == pytest.approx(s2b, rel=1e-7)


def test_channel_moments_against_sector_kernels():
    # loss plus thermal dark admixture on both arms, brute forced with full
    # conserved-total beam-splitter sectors
    ns, a2, N = 1.0, 2.0, 2
    eta1, eta2, d1, d2 = 0.7, 0.55, 0.3, 0.15
    c, kd = 120, 30
    out = oracle.squeeze_expm(oracle.fock_coherent(N, math.sqrt(a2), c, c),
                              math.asinh(math.sqrt(ns)))
    P = np.abs(out) ** 2
    T1 = oracle.bs_sector_kernel(c + kd, c, kd, eta1, oracle.thermal_weights(d1, kd))
    T2 = oracle.bs_sector_kernel(c + kd, c, kd, eta2, oracle.thermal_weights(d2, kd))
    mm = oracle.moments_from_probs(T1 @ P @ T2.T)
    p = DeviceParams(ns=ns, nalpha=a2, eta1=eta1, eta2=eta2, dark1=d1, dark2=d2)
    want = analytic.channel_moments(p, InputState.fock(N))
    for key in ("na", "nb", "nanb", "na2", "nb2", "na2nb2"):
        assert mm[key] == pytest.approx(want[key], rel=1e-8), key


def test_thermal_moments_against_branch_sum():
    # geometric mixture summed branch by branch through the expm squeezer
    ns, a2, mean = 1.0, 1.0, 0.4
    p = DeviceParams(ns=ns, nalpha=a2)
    c = 70
    r = math.asinh(math.sqrt(ns))
    w = oracle.thermal_weights(mean, 24)
    got = {"na": 0.0, "nb": 0.0, "nanb": 0.0}
    for N in range(24):
        mm = oracle.state_moments(
            oracle.squeeze_expm(oracle.fock_coherent(N, math.sqrt(a2), c, c), r))
        for key in got:
            got[key] += w[N] * mm[key]
    want = analytic.channel_moments(p, InputState.thermal(mean))
    for key in got:
        assert got[key] == pytest.approx(want[key], rel=1e-8), key


def test_tmsv_limit_against_geometric_sum():
    for ns in (0.25, 1.0, 2.0, 3.5):
        p = DeviceParams(ns=ns, nalpha=0.0)
        ref = oracle.tmsv_moments(ns)
        assert analytic.correlation_signal(p, 0) == pytest.approx(ref["nanb"], rel=1e-10)
        assert analytic.correlation_variance(p, 0) == pytest.approx(
            ref["na2nb2"] - ref["nanb"] ** 2, rel=1e-10)


# ---------------------------------------------------------------------------
# algebraic identities

@given(ns=ns_floats, a2=a2_floats, N=n_ints)
def test_g12_is_signal_over_intensity_product(ns, a2, N):
    p = DeviceParams(ns=ns, nalpha=a2)
    na, nb, _ = analytic.intensities(p, N)
    want = analytic.correlation_signal(p, N) / (na * nb)
    assert analytic.g12(p, N) == pytest.approx(want, rel=1e-10)


@given(ns=st.floats(min_value=0.05, max_value=4.0))
def test_g12_vacuum_limit(ns):
    p = DeviceParams(ns=ns, nalpha=0.0)
    assert analytic.g12(p, 0) == pytest.approx(2.0 + 1.0 / ns, rel=1e-12)


@given(ns=ns_floats, a2=a2_floats, N=n_ints,
       e1=st.floats(min_value=0.0, max_value=1.0),
       e2=st.floats(min_value=0.0, max_value=1.0))
def test_pure_loss_scales_the_signal(ns, a2, N, e1, e2):
    p = DeviceParams(ns=ns, nalpha=a2, eta1=e1, eta2=e2)
    m = analytic.channel_moments(p, InputState.fock(N))
    want = e1 * e2 * analytic.correlation_signal(p, N)
    assert m["nanb"] == pytest.approx(want, rel=1e-12, abs=1e-12)
    assert analytic.correlation_signal_lossy(p, N) == pytest.approx(
        want, rel=1e-12, abs=1e-12)


@given(ns=ns_floats, a2=a2_floats, N=n_ints,
       e1=st.floats(min_value=0.0, max_value=1.0),
       d1=st.floats(min_value=0.0, max_value=2.0))
def test_channel_mean_transform(ns, a2, N, e1, d1):
    p = DeviceParams(ns=ns, nalpha=a2, eta1=e1, dark1=d1)
    na_lossless, _, _ = analytic.intensities(p, N)
    m = analytic.channel_moments(p, InputState.fock(N))
    assert m["na"] == pytest.approx(e1 * na_lossless + (1 - e1) * d1,
                                    rel=1e-12, abs=1e-12)


@given(ns=ns_floats, a2=a2_floats, N=st.integers(min_value=0, max_value=10))
def test_signal_steps_are_monotone_with_constant_curvature(ns, a2, N):
    p = DeviceParams(ns=ns, nalpha=a2)
    step = analytic.step_size(p, N)
    assert step > 0
    x0 = analytic.correlation_signal(p, N)
    x1 = analytic.correlation_signal(p, N + 1)
    x2 = analytic.correlation_signal(p, N + 2)
    assert x1 - x0 == pytest.approx(step, rel=1e-12)
    # second difference of a quadratic in N
    assert x2 - 2 * x1 + x0 == pytest.approx(2 * ns * (1 + ns), rel=1e-9)


def test_step_stays_below_noise():
    for ns in (0.5, 1.0, 2.0):
        for a2 in (0.0, 1.0, 4.0, 25.0):
            p = DeviceParams(ns=ns, nalpha=a2)
            for N in range(11):
                step = analytic.step_size(p, N)
                noise = math.sqrt(analytic.correlation_variance(p, N))
                assert step < noise, (ns, a2, N)


@given(ns=ns_floats, a2=a2_floats, mean=st.floats(min_value=0.0, max_value=3.0))
def test_thermal_mixing_matches_direct_sum(ns, a2, mean):
    p = DeviceParams(ns=ns, nalpha=a2)
    want = analytic.channel_moments(p, InputState.thermal(mean))
    w = oracle.thermal_weights(mean, 400)
    got = math.fsum(w[N] * analytic.correlation_signal(p, N) for N in range(400))
    assert got == pytest.approx(want["nanb"], rel=1e-10)


def test_thermal_exceeds_fock_by_occupation_variance():
    # gap = s*c*(N^2 + N), the geometric number variance times the quadratic
    # coefficient; grows monotonically with the mean
    p = DeviceParams(ns=2.0, nalpha=1.0)
    sc = p.ns * (1 + p.ns)
    last = 0.0
    for N in range(1, 8):
        gap = analytic.channel_moments(p, InputState.thermal(float(N)))["nanb"] \
            - analytic.correlation_signal(p, N)
        assert gap == pytest.approx(sc * (N**2 + N), rel=1e-10)
        assert gap > last
        last = gap


@given(a2=st.floats(min_value=0.1, max_value=20.0), N=n_ints,
       e1=st.floats(min_value=0.1, max_value=1.0),
       d1=st.floats(min_value=0.0, max_value=1.0),
       d2=st.floats(min_value=0.0, max_value=1.0))
def test_arms_are_independent_without_squeezing(a2, N, e1, d1, d2):
    p = DeviceParams(ns=0.0, nalpha=a2, eta1=e1, eta2=0.8, dark1=d1, dark2=d2)
    m = analytic.channel_moments(p, InputState.fock(N))
    scale = max(1.0, abs(m["na"] * m["nb"]))
    assert abs(m["nanb"] - m["na"] * m["nb"]) <= 1e-12 * scale


@given(ns=ns_floats, a2=a2_floats, N=n_ints)
def test_number_correlation_is_normalized(ns, a2, N):
    p = DeviceParams(ns=ns, nalpha=a2)
    cov, corr = analytic.number_covariance(p, N)
    assert -1.0 <= corr <= 1.0
    na, nb, _ = analytic.intensities(p, N)
    assert cov == pytest.approx(analytic.correlation_signal(p, N) - na * nb,
                                rel=1e-12, abs=1e-12)


@given(ns=ns_floats, a2=a2_floats, N=n_ints)
def test_intensity_difference_is_conserved(ns, a2, N):
    na, nb, m_minus = analytic.intensities(DeviceParams(ns=ns, nalpha=a2), N)
    assert m_minus == N - a2
    assert na - nb == pytest.approx(m_minus, rel=1e-12, abs=1e-9)


@settings(max_examples=30)
@given(ns=st.floats(min_value=0.5, max_value=3.0), N=st.integers(0, 3),
       extra=st.floats(min_value=0.5, max_value=6.0))
def test_optimum_alpha_sits_on_the_budget_boundary(ns, N, extra):
    budget = ns + extra
    best = analytic.optimum_alpha(ns, N, budget, points=201)
    assert best == pytest.approx(budget - ns, rel=1e-12)


def test_optimum_alpha_rejects_degenerate_scan():
    with pytest.raises(ValueError):
        analytic.optimum_alpha(2.0, 0, 1.5)


def test_snr_degenerate_noise_raises():
    with pytest.raises(DegenerateNoiseError):
        analytic.snr(DeviceParams(ns=0.0, nalpha=0.0), 0)


def test_g12_undefined_at_double_vacuum():
    with pytest.raises(ZeroDivisionError):
        analytic.g12(DeviceParams(ns=0.0, nalpha=0.0), 0)


def test_fractional_photon_number_rejected():
    p = DeviceParams(ns=1.0, nalpha=1.0)
    with pytest.raises(ValueError):
        analytic.correlation_signal(p, 1.5)
    with pytest.raises(ValueError):
        analytic.intensities(p, -1)


def test_dark_mean_behavior():
    assert analytic.dark_mean(9.7e-6, 200.0) < analytic.dark_mean(9.7e-6, 300.0)
    assert analytic.dark_mean(500e-9, 300.0) < 1e-40  # optical: frozen out
    assert analytic.dark_mean(9.7e-6, 0.02) == 0.0    # exp would overflow
    with pytest.raises(ValueError):
        analytic.dark_mean(-1.0, 300.0)


# ---------------------------------------------------------------------------
# parameter plumbing

def test_params_derive_r_from_ns_and_back():
    p = DeviceParams(ns=2.0)
    assert p.r == pytest.approx(math.asinh(math.sqrt(2.0)), rel=1e-15)
    q = DeviceParams(r=p.r)
    assert q.ns == pytest.approx(2.0, rel=1e-12)
    assert DeviceParams(ns=0.0).r == 0.0


def test_params_reject_inconsistent_pair():
    with pytest.raises(ValueError):
        DeviceParams(ns=2.0, r=0.3)


def test_params_replace_rederives_the_partner():
    p = DeviceParams(ns=2.0, nalpha=1.0)
    q = p.replace(ns=1.0)
    assert q.r == pytest.approx(math.asinh(1.0), rel=1e-15)
    w = p.replace(r=0.0)
    assert w.ns == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        DeviceParams(ns=-0.5)
    with pytest.raises(ValueError):
        DeviceParams(ns=1.0, eta1=1.5)
    with pytest.raises(ValueError):
        DeviceParams(ns=1.0, dark2=-0.1)
    with pytest.raises(ValueError):
        InputState.fock(1.5)
    with pytest.raises(ValueError):
        InputState("squeezed", 1.0)
    assert DeviceParams(ns=1.0).lossless
    assert not DeviceParams(ns=1.0, dark1=0.2).lossless


def test_signal_point_assembles_all_columns():
    p = DeviceParams(ns=2.0, nalpha=1.0)
    pt = analytic.signal_point(p, InputState.fock(1))
    assert pt.c_mean == 85.0
    assert pt.na_mean == 7.0 and pt.nb_mean == 7.0 and pt.m_minus == 0.0
    assert pt.c_var == pytest.approx(analytic.correlation_variance(p, 1), rel=1e-12)
    assert pt.snr == pytest.approx(85.0 / math.sqrt(pt.c_var), rel=1e-12)
    assert pt.g12 == pytest.approx(85.0 / 49.0, rel=1e-12)
