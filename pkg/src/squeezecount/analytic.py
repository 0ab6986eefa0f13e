"""Closed-form moments for the two-mode-squeezer detector.

Everything here is a polynomial identity in ns = sinh(r)^2 evaluated in
double precision. Polynomials are grouped by powers of ns against (1+ns) to
limit cancellation; every group is cross-checked against the truncated-Fock
oracle in the test suite before being trusted.

Loss and dark counts enter through an exact transform of joint factorial
moments: mixing an arm with a thermal ancilla of mean d on a beam splitter
of transmissivity eta maps the j-th factorial moment of the arm photon
number to

    <n_out^(j)> = sum_i C(j,i)^2 eta^i (1-eta)^(j-i) (j-i)! d^(j-i) <n^(i)>

and the two arms transform independently. Thermal input states are handled
by mixing the Fock-input polynomials over the geometric photon distribution,
which is exact because every moment is linear in the state.
"""
from __future__ import annotations

import math

from scipy.constants import c as _LIGHT_SPEED, h as _PLANCK, k as _BOLTZMANN
from scipy.stats import norm as _gauss

from .params import DeviceParams, InputState, SignalPoint

__all__ = [
    "DegenerateNoiseError",
    "intensities",
    "correlation_signal",
    "correlation_signal_lossy",
    "correlation_variance",
    "second_moments",
    "snr",
    "g12",
    "number_covariance",
    "step_size",
    "optimum_alpha",
    "dark_mean",
    "channel_moments",
    "signal_point",
]


class DegenerateNoiseError(ValueError):
    """The noise radicand is not positive; SNR is undefined at this point."""


# ---------------------------------------------------------------------------
# core polynomials in (ns, nalpha, N); a2 stands for nalpha = alpha^2

def _mean_a(ns, a2, N):
    return ns * (a2 + N) + N + ns


def _mean_b(ns, a2, N):
    return ns * (a2 + N) + a2 + ns


def _signal(ns, a2, N):
    s, c = ns, 1.0 + ns
    return (a2 + 1) * (N + 1) * s * s + a2 * N * c * c \
        + (a2 * a2 + a2 * (2 * N + 3) + (N + 1) ** 2) * s * c


def _variance(ns, a2, N):
    # grouped by powers of ns; every coefficient is non-negative
    S, C = ns, 1.0 + ns
    t0 = N**2 * a2 * C**4
    t1 = (1 + 3 * N + 3 * N**2 + N**3
          + a2 * (7 + 19 * N + 11 * N**2 + 2 * N**3)
          + a2**2 * (6 + 13 * N + 4 * N**2)
          + a2**3 * (1 + 2 * N)) * C**3 * S
    t2 = (10 + 20 * N + 12 * N**2 + 2 * N**3
          + a2 * (43 + 68 * N + 32 * N**2 + 4 * N**3)
          + a2**2 * (32 + 36 * N + 10 * N**2)
          + a2**3 * (6 + 4 * N)) * C**2 * S**2
    t3 = (9 + 15 * N + 7 * N**2 + N**3
          + a2 * (29 + 47 * N + 19 * N**2 + 2 * N**3)
          + a2**2 * (14 + 21 * N + 4 * N**2)
          + a2**3 * (1 + 2 * N)) * C * S**3
    t4 = a2 * (1 + 2 * N + N**2) * S**4
    return t0 + t1 + t2 + t3 + t4


def _cross_ab2(ns, a2, N):
    # <Na Nb^2>
    S, C = ns, 1.0 + ns
    g0 = N * (a2 + a2**2) * C**3
    g1 = (2 * a2 + N**2 * a2 + 2 * N * (1 + N) * a2 + 4 * a2**2 + a2**3
          + N * (1 + N) * (1 + a2) + N * (a2 + 2 * a2**2)
          + (1 + N) * (1 + 5 * a2 + 2 * a2**2)) * C**2 * S
    g2 = (N * (1 + N)**2 + (N**2 + N * (1 + N)) * a2
          + (1 + N) * (3 + 2 * N) * (1 + a2)
          + N * (2 * a2 + a2**2)
          + (1 + N) * (1 + 7 * a2 + 3 * a2**2)) * C * S**2
    g3 = (1 + N)**2 * (1 + a2) * S**3
    return g0 + g1 + g2 + g3


def _cross_a2b(ns, a2, N):
    # <Na^2 Nb>
    S, C = ns, 1.0 + ns
    g0 = N**2 * a2 * C**3
    g1 = (N**2 * (1 + N) + (-1 + N) * N * a2 + N**2 * a2
          + N * (1 + N) * (1 + a2) + (1 + N)**2 * (1 + a2)
          + N * (a2 + a2**2) + 2 * N * (2 * a2 + a2**2)
          + (1 + N) * (2 * a2 + a2**2)) * C**2 * S
    g2 = (4 * a2 + N * (1 + N) * a2 + 5 * a2**2 + a2**3
          + 2 * N * (1 + N) * (1 + a2) + (1 + N)**2 * (1 + a2)
          + N * (a2 + a2**2) + N * (2 * a2 + a2**2)
          + (1 + N) * (1 + 3 * a2 + a2**2)
          + (1 + N) * (2 + 4 * a2 + a2**2)) * C * S**2
    g3 = (1 + N) * (1 + 3 * a2 + a2**2) * S**3
    return g0 + g1 + g2 + g3


def _second_a(ns, a2, N):
    # <Na^2>; derived from the mode transform, oracle-validated in the tests
    s, c = ns, 1.0 + ns
    return c * c * N * N + s * c * (4 * N * a2 + 3 * N + a2 + 1) \
        + s * s * (a2 * a2 + 3 * a2 + 1)


def _second_b(ns, a2, N):
    # <Nb^2>
    s, c = ns, 1.0 + ns
    return c * c * (a2 * a2 + a2) + s * c * (4 * N * a2 + 3 * a2 + N + 1) \
        + s * s * (N + 1) ** 2


def _step(ns, a2, N):
    s, c = ns, 1.0 + ns
    return (a2 + 1) * s * s + a2 * c * c + (2 * a2 + 2 * N + 3) * s * c


# ---------------------------------------------------------------------------
# thermal mixing: geometric factorial moments E[C(N,k)] = mean^k, so the
# mixture of a degree-d polynomial is its Newton forward series at the mean

def _thermal_mix(f, mean, degree):
    vals = [f(float(k)) for k in range(degree + 1)]
    total = 0.0
    power = 1.0
    for k in range(degree + 1):
        total += vals[0] * power
        power *= mean
        vals = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
    return total


# joint factorial moments F[i][j] = <na^(i) nb^(j)> of the lossless output,
# indexed 0..2 on each arm
def _factorial_moments(ns, a2, N):
    na = _mean_a(ns, a2, N)
    nb = _mean_b(ns, a2, N)
    x = _signal(ns, a2, N)
    z = _variance(ns, a2, N) + x * x
    ya2b = _cross_a2b(ns, a2, N)
    yab2 = _cross_ab2(ns, a2, N)
    return {
        (0, 0): 1.0,
        (1, 0): na,
        (0, 1): nb,
        (2, 0): _second_a(ns, a2, N) - na,
        (0, 2): _second_b(ns, a2, N) - nb,
        (1, 1): x,
        (2, 1): ya2b - x,
        (1, 2): yab2 - x,
        (2, 2): z - ya2b - yab2 + x,
    }


def _factorial_moments_thermal(ns, a2, mean):
    out = {}
    for key in [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1), (2, 1), (1, 2), (2, 2)]:
        out[key] = _thermal_mix(lambda n, k=key: _factorial_moments(ns, a2, n)[k], mean, 4)
    return out


def _arm_coef(j, i, eta, d):
    return math.comb(j, i) ** 2 * eta**i * (1.0 - eta) ** (j - i) \
        * math.factorial(j - i) * d ** (j - i)


def _out_factorial(p, q, F, eta1, d1, eta2, d2):
    total = 0.0
    for i in range(p + 1):
        ca = _arm_coef(p, i, eta1, d1)
        if ca == 0.0:
            continue
        for j in range(q + 1):
            cb = _arm_coef(q, j, eta2, d2)
            if cb == 0.0:
                continue
            total += ca * cb * F[(i, j)]
    return total


def channel_moments(p: DeviceParams, input_state: InputState) -> dict:
    """Ordinary output moments after loss and dark admixture on both arms.

    Returns a dict with na, nb, nanb, na2, nb2, na2nb2. Exact for fock and
    thermal inputs; coherent inputs have no closed form here and belong to
    the gaussian or fock engines.
    """
    ns, a2 = p.ns, p.nalpha
    kind = input_state.kind
    if kind in ("vacuum",):
        F = _factorial_moments(ns, a2, 0.0)
    elif kind == "fock":
        F = _factorial_moments(ns, a2, input_state.value)
    elif kind == "thermal":
        F = _factorial_moments_thermal(ns, a2, input_state.value)
    else:
        raise ValueError(f"no closed-form moments for {kind!r} input")
    e1, e2, d1, d2 = p.eta1, p.eta2, p.dark1, p.dark2
    na = _out_factorial(1, 0, F, e1, d1, e2, d2)
    nb = _out_factorial(0, 1, F, e1, d1, e2, d2)
    nanb = _out_factorial(1, 1, F, e1, d1, e2, d2)
    na2 = _out_factorial(2, 0, F, e1, d1, e2, d2) + na
    nb2 = _out_factorial(0, 2, F, e1, d1, e2, d2) + nb
    na2nb2 = (_out_factorial(2, 2, F, e1, d1, e2, d2)
              + _out_factorial(2, 1, F, e1, d1, e2, d2)
              + _out_factorial(1, 2, F, e1, d1, e2, d2)
              + nanb)
    return {"na": na, "nb": nb, "nanb": nanb, "na2": na2, "nb2": nb2, "na2nb2": na2nb2}


# ---------------------------------------------------------------------------
# public operations

def _check_N(N):
    if N < 0 or N != int(N):
        raise ValueError(f"photon number must be a non-negative integer, got {N}")
    return float(N)


def intensities(p: DeviceParams, N: int) -> tuple[float, float, float]:
    """Lossless output means (na_mean, nb_mean, m_minus) for a fock input."""
    n = _check_N(N)
    return (_mean_a(p.ns, p.nalpha, n), _mean_b(p.ns, p.nalpha, n), n - p.nalpha)


def correlation_signal(p: DeviceParams, N: int) -> float:
    """Lossless intensity-intensity correlation <Na Nb> for a fock input."""
    return _signal(p.ns, p.nalpha, _check_N(N))


def correlation_signal_lossy(p: DeviceParams, N: int) -> float:
    """<Na Nb> after pure loss on both arms: eta1*eta2 times the lossless value."""
    return p.eta1 * p.eta2 * correlation_signal(p, N)


def correlation_variance(p: DeviceParams, N: int) -> float:
    """Lossless variance of the correlation signal for a fock input."""
    return _variance(p.ns, p.nalpha, _check_N(N))


def second_moments(p: DeviceParams, N: int) -> tuple[float, float]:
    """Lossless single-mode second moments (<Na^2>, <Nb^2>) for a fock input."""
    n = _check_N(N)
    return (_second_a(p.ns, p.nalpha, n), _second_b(p.ns, p.nalpha, n))


_NOISE_FLOOR = 1e-12


def snr(p: DeviceParams, N: int) -> float:
    """Signal-to-noise ratio of the correlation signal through the full
    loss-and-dark channel; reduces to c_mean/sqrt(c_var) at unit
    transmissivity and zero dark occupation."""
    n = _check_N(N)
    if p.lossless:
        x = _signal(p.ns, p.nalpha, n)
        v = _variance(p.ns, p.nalpha, n)
        if v <= _NOISE_FLOOR * max(1.0, x * x):
            raise DegenerateNoiseError(f"zero noise at ns={p.ns} nalpha={p.nalpha} N={N}")
        return x / math.sqrt(v)
    m = channel_moments(p, InputState.fock(int(n)))
    var = m["na2nb2"] - m["nanb"] ** 2
    if var <= _NOISE_FLOOR * max(1.0, m["na2nb2"]):
        raise DegenerateNoiseError(
            f"noise radicand {var} is not positive at eta=({p.eta1},{p.eta2})")
    return m["nanb"] / math.sqrt(var)


def g12(p: DeviceParams, N: int) -> float:
    """Zero-delay two-mode second-order correlation <Na Nb>/(<Na><Nb>),
    evaluated from its rational closed form."""
    n = _check_N(N)
    ns, a2 = p.ns, p.nalpha
    den = (a2 * (1 + ns) + (n + 1) * ns) * (n * (1 + ns) + (1 + a2) * ns)
    if den == 0.0:
        raise ZeroDivisionError(
            "g12 undefined: both output means vanish (no squeezing and vacuum input)")
    num = (n * a2 * (ns**2 + (1 + ns) ** 2)
           + ((n + 1) ** 2 + (2 * n + 3) * a2 + a2**2) * ns * (1 + ns)
           + (1 + n + a2) * ns**2)
    return num / den


def number_covariance(p: DeviceParams, N: int) -> tuple[float, float]:
    """Lossless (cov_ab, corr_ab) for a fock input. corr_ab uses the
    oracle-validated single-mode second moments."""
    n = _check_N(N)
    ns, a2 = p.ns, p.nalpha
    cov = _signal(ns, a2, n) - _mean_a(ns, a2, n) * _mean_b(ns, a2, n)
    var_a = _second_a(ns, a2, n) - _mean_a(ns, a2, n) ** 2
    var_b = _second_b(ns, a2, n) - _mean_b(ns, a2, n) ** 2
    if cov == 0.0:
        return (0.0, 0.0)
    # perfect correlation can round a hair past 1
    corr = cov / math.sqrt(var_a * var_b)
    return (cov, max(-1.0, min(1.0, corr)))


def step_size(p: DeviceParams, N: int) -> float:
    """Increment of the correlation signal when the fock input gains one photon."""
    return _step(p.ns, p.nalpha, _check_N(N))


def optimum_alpha(ns: float, N: int, budget: float, points: int = 101) -> float:
    """Best coherent-probe strength under a total mean-photon budget.

    Scans nalpha over [0, budget - ns] at fixed squeezing ns and returns the
    nalpha maximizing the correlation signal. The signal grows monotonically
    with probe power, so the optimum sits on the budget boundary; splitting
    the budget evenly puts it at nalpha equal to ns.
    """
    n = _check_N(N)
    span = budget - ns
    if span <= 0:
        raise ValueError(f"degenerate scan: budget {budget} leaves no room beyond ns {ns}")
    if points < 2:
        raise ValueError(f"scan needs at least 2 points, got {points}")
    best_a, best_v = 0.0, -math.inf
    for k in range(points):
        a2 = span * k / (points - 1)
        v = _signal(ns, a2, n)
        if v > best_v:
            best_a, best_v = a2, v
    return best_a


def dark_mean(wavelength: float, temperature: float) -> float:
    """Bose-Einstein occupation at the given wavelength and temperature."""
    if wavelength <= 0 or temperature <= 0:
        raise ValueError("wavelength and temperature must be positive")
    x = _PLANCK * _LIGHT_SPEED / (wavelength * _BOLTZMANN * temperature)
    if x > 700.0:  # exp overflow; occupation is zero to double precision anyway
        return 0.0
    return 1.0 / math.expm1(x)


def confidence_z(confidence: float) -> float:
    """Two-sided Gaussian quantile for the given confidence level."""
    if not 0.5 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0.5, 1), got {confidence}")
    return float(_gauss.ppf(0.5 * (1.0 + confidence)))


# ---------------------------------------------------------------------------
# full operating-point assembly (the sweeps analytic engine)

def signal_point(p: DeviceParams, input_state: InputState) -> SignalPoint:
    """Evaluate every SignalPoint column at one operating point.

    Supports fock, thermal and vacuum inputs. All columns go through the
    loss-and-dark channel, so with a nontrivial channel c_mean and c_var are
    the measured (post-channel) moments.
    """
    m = channel_moments(p, input_state)
    na, nb, c = m["na"], m["nb"], m["nanb"]
    var = m["na2nb2"] - c * c
    var = max(var, 0.0)
    if var > 0:
        point_snr = c / math.sqrt(var)
    else:
        point_snr = math.nan
    if p.lossless and input_state.kind in ("fock", "vacuum"):
        g = g12(p, int(input_state.value)) if na * nb != 0 else math.nan
    else:
        g = c / (na * nb) if na * nb != 0 else math.nan
    cov = c - na * nb
    var_a = m["na2"] - na * na
    var_b = m["nb2"] - nb * nb
    if cov == 0.0:
        corr = 0.0
    else:
        corr = cov / math.sqrt(var_a * var_b)
    return SignalPoint(
        N=input_state.value, c_mean=c, c_var=var, snr=point_snr, g12=g,
        na_mean=na, nb_mean=nb, m_minus=na - nb, cov_ab=cov, corr_ab=corr,
    )
