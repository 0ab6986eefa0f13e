"""Gaussian (covariance-matrix) engine.

Quadrature convention: xpxp ordering, hbar = 1, vacuum covariance I/2.
A coherent state of photon mean m has mean vector (sqrt(2m), 0) in its
block; a thermal state of mean m has covariance (2m + 1)/2 * I. Photon
moments up to fourth order in quadratures come from Wick contractions, so
number means, pair moments and single-mode second moments are exact here;
the full counting variance needs eighth-order contractions and is left to
the Fock and closed-form engines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import DeviceParams, InputState, SignalPoint

__all__ = [
    "GaussianState",
    "omega",
    "gaussian_prepare",
    "apply_symplectic_squeezer",
    "apply_symplectic_beamsplitter",
    "attenuate",
    "photon_mean",
    "photon_pair_moment",
    "photon_second_moment",
    "gaussian_signal_point",
]


def omega(modes: int) -> np.ndarray:
    """Symplectic form in xpxp ordering."""
    o = np.zeros((2 * modes, 2 * modes))
    for i in range(modes):
        o[2 * i, 2 * i + 1] = 1.0
        o[2 * i + 1, 2 * i] = -1.0
    return o


@dataclass
class GaussianState:
    modes: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.mean.shape != (2 * self.modes,):
            raise ValueError(f"mean shape {self.mean.shape} for {self.modes} modes")
        if self.cov.shape != (2 * self.modes,) * 2:
            raise ValueError(f"cov shape {self.cov.shape} for {self.modes} modes")

    def validate(self, sym_tol: float = 1e-12, eig_floor: float = -1e-10) -> None:
        dev = float(np.max(np.abs(self.cov - self.cov.T)))
        if dev > sym_tol:
            raise ValueError(f"covariance not symmetric: max dev {dev}")
        herm = self.cov + 0.5j * omega(self.modes)
        low = float(np.linalg.eigvalsh(herm).min())
        if low < eig_floor:
            raise ValueError(f"uncertainty relation violated: min eigenvalue {low}")

    def purity_det(self) -> float:
        """det(2 cov); equals 1 exactly for pure states."""
        return float(np.linalg.det(2.0 * self.cov))


def gaussian_prepare(specs: list[InputState]) -> GaussianState:
    """Product state, one mode per spec. Fock inputs with N > 0 are not
    Gaussian and are rejected."""
    m = len(specs)
    if m < 1:
        raise ValueError("need at least one mode")
    mean = np.zeros(2 * m)
    cov = 0.5 * np.eye(2 * m)
    for i, s in enumerate(specs):
        if s.kind == "fock" and s.value > 0:
            raise ValueError(
                f"fock input N={int(s.value)} has no Gaussian representation")
        if s.kind == "coherent":
            mean[2 * i] = math.sqrt(2.0 * s.value)
        elif s.kind == "thermal":
            cov[2 * i, 2 * i] = cov[2 * i + 1, 2 * i + 1] = (2.0 * s.value + 1.0) / 2.0
    return GaussianState(m, mean, cov)


def _expand(block: np.ndarray, pair: tuple[int, int], modes: int) -> np.ndarray:
    i, j = pair
    s = np.eye(2 * modes)
    idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
    for r, ri in enumerate(idx):
        for c, ci in enumerate(idx):
            s[ri, ci] = block[r, c]
    return s


def _apply(g: GaussianState, s: np.ndarray) -> GaussianState:
    return GaussianState(g.modes, s @ g.mean, s @ g.cov @ s.T)


def apply_symplectic_squeezer(g: GaussianState, pair: tuple[int, int],
                              r: float) -> GaussianState:
    """Two-mode squeeze on the given mode pair, same sign convention as the
    Fock-space product form (a -> a cosh r - b+ sinh r)."""
    i, j = pair
    if i == j or not (0 <= i < g.modes and 0 <= j < g.modes):
        raise ValueError(f"invalid mode pair {pair}")
    mu, nu = math.cosh(r), math.sinh(r)
    block = np.array([
        [mu, 0.0, -nu, 0.0],
        [0.0, mu, 0.0, nu],
        [-nu, 0.0, mu, 0.0],
        [0.0, nu, 0.0, mu],
    ])
    return _apply(g, _expand(block, pair, g.modes))


def apply_symplectic_beamsplitter(g: GaussianState, pair: tuple[int, int],
                                  eta: float) -> GaussianState:
    """Beam splitter of transmissivity eta on the given mode pair; eta = 0
    swaps the modes (up to a phase invisible in number moments)."""
    i, j = pair
    if i == j or not (0 <= i < g.modes and 0 <= j < g.modes):
        raise ValueError(f"invalid mode pair {pair}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmissivity out of [0,1]: {eta}")
    c, s = math.sqrt(eta), math.sqrt(1.0 - eta)
    block = np.array([
        [c, 0.0, -s, 0.0],
        [0.0, c, 0.0, -s],
        [s, 0.0, c, 0.0],
        [0.0, s, 0.0, c],
    ])
    return _apply(g, _expand(block, pair, g.modes))


def _drop_mode(g: GaussianState, mode: int) -> GaussianState:
    keep = [k for k in range(2 * g.modes) if k // 2 != mode]
    return GaussianState(g.modes - 1, g.mean[keep], g.cov[np.ix_(keep, keep)])


def attenuate(g: GaussianState, mode: int, eta: float,
              dark_mean: float = 0.0) -> GaussianState:
    """Loss channel on one mode: mix with a thermal ancilla of mean
    dark_mean on a beam splitter and trace the ancilla out."""
    anc = gaussian_prepare([InputState.thermal(dark_mean)] if dark_mean > 0
                           else [InputState.vacuum()])
    m = g.modes
    mean = np.concatenate([g.mean, anc.mean])
    cov = np.zeros((2 * m + 2, 2 * m + 2))
    cov[: 2 * m, : 2 * m] = g.cov
    cov[2 * m:, 2 * m:] = anc.cov
    big = GaussianState(m + 1, mean, cov)
    big = apply_symplectic_beamsplitter(big, (mode, m), eta)
    return _drop_mode(big, m)


def photon_mean(g: GaussianState, mode: int) -> float:
    i = 2 * mode
    v = g.cov[i: i + 2, i: i + 2]
    m = g.mean[i: i + 2]
    return float((np.trace(v) + m @ m - 1.0) / 2.0)


def photon_pair_moment(g: GaussianState, pair: tuple[int, int]) -> float:
    """<n_i n_j> for i != j via fourth-order Wick contractions."""
    i, j = pair
    if i == j:
        raise ValueError("pair moment needs two distinct modes")
    qi, qj = (2 * i, 2 * i + 1), (2 * j, 2 * j + 1)
    tot = 0.0
    for u in qi:
        for v in qj:
            mu, mv = g.mean[u], g.mean[v]
            vu, vv = g.cov[u, u], g.cov[v, v]
            c = g.cov[u, v]
            tot += (mu * mu * mv * mv + mu * mu * vv + mv * mv * vu
                    + 4.0 * mu * mv * c + vu * vv + 2.0 * c * c)
    ai = 2.0 * photon_mean(g, i) + 1.0
    aj = 2.0 * photon_mean(g, j) + 1.0
    return float((tot - ai - aj + 1.0) / 4.0)


def photon_second_moment(g: GaussianState, mode: int) -> float:
    """<n^2> for one mode: <a+a+aa> from the complex displacement beta,
    thermal part Ns and anomalous part Ms of the block, plus <n>."""
    i = 2 * mode
    mx, mp = g.mean[i], g.mean[i + 1]
    vxx, vpp, vxp = g.cov[i, i], g.cov[i + 1, i + 1], g.cov[i, i + 1]
    beta = (mx + 1j * mp) / math.sqrt(2.0)
    ns = (vxx + vpp - 1.0) / 2.0
    ms = (vxx - vpp + 2j * vxp) / 2.0
    a2a2 = (abs(beta) ** 4 + 2.0 * (ms * np.conj(beta) ** 2).real
            + 4.0 * ns * abs(beta) ** 2 + 2.0 * ns * ns + abs(ms) ** 2)
    return float(a2a2 + photon_mean(g, mode))


def gaussian_signal_point(p: DeviceParams, input_state: InputState, N: float) -> SignalPoint:
    """Post-channel observables from the Gaussian engine. The counting
    variance and SNR need eighth-order contractions and are reported as nan;
    sweeps flag those columns instead of silently filling them."""
    g = gaussian_prepare([input_state, InputState.coherent(p.nalpha)])
    g = apply_symplectic_squeezer(g, (0, 1), p.r)
    if p.eta1 < 1.0 or p.dark1 > 0.0:
        g = attenuate(g, 0, p.eta1, p.dark1)
    if p.eta2 < 1.0 or p.dark2 > 0.0:
        g = attenuate(g, 1, p.eta2, p.dark2)
    na = photon_mean(g, 0)
    nb = photon_mean(g, 1)
    c_mean = photon_pair_moment(g, (0, 1))
    cov_ab = c_mean - na * nb
    var_a = photon_second_moment(g, 0) - na * na
    var_b = photon_second_moment(g, 1) - nb * nb
    corr = cov_ab / math.sqrt(var_a * var_b) if var_a > 0 and var_b > 0 else 0.0
    g12 = c_mean / (na * nb) if na * nb > 0 else float("nan")
    return SignalPoint(
        N=N, c_mean=c_mean, c_var=float("nan"), snr=float("nan"), g12=g12,
        na_mean=na, nb_mean=nb, m_minus=na - nb, cov_ab=cov_ab, corr_ab=corr,
    )
