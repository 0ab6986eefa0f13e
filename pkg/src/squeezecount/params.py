"""Device parameterization and input-state tags shared by every engine."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

NS_DEFAULT = 2.0        # working squeezing strength, mean photons per squeezed mode
NALPHA_DEFAULT = 25.0   # working coherent-probe mean photon number

# relative tolerance tying ns to sinh(r)^2
_NS_R_RTOL = 1e-12


@dataclass(frozen=True)
class DeviceParams:
    """Static description of the detector: squeezer strength, probe power,
    per-arm transmissivities and dark occupations.

    Exactly one of ns (mean photons per squeezed mode, sinh(r)^2) or r (the
    squeeze parameter) needs to be given; the other is derived. Supplying both
    is allowed only if they are consistent. dark1/dark2 are the thermal mean
    occupations of the ancilla modes mixed in at the loss beam splitters.
    """

    ns: float | None = None
    r: float | None = None
    nalpha: float = NALPHA_DEFAULT
    eta1: float = 1.0
    eta2: float = 1.0
    dark1: float = 0.0
    dark2: float = 0.0

    def __post_init__(self):
        ns, r = self.ns, self.r
        if ns is None and r is None:
            ns = NS_DEFAULT
        if ns is None:
            ns = math.sinh(r) ** 2
        if r is None:
            if ns < 0:
                raise ValueError(f"ns must be >= 0, got {ns}")
            r = math.asinh(math.sqrt(ns))
        object.__setattr__(self, "ns", float(ns))
        object.__setattr__(self, "r", float(r))
        if abs(self.ns - math.sinh(self.r) ** 2) > _NS_R_RTOL * max(1.0, self.ns):
            raise ValueError(
                f"inconsistent squeezing: ns={self.ns} but sinh(r)^2={math.sinh(self.r) ** 2}"
            )
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v}")
        if self.ns < 0:
            raise ValueError(f"ns must be >= 0, got {self.ns}")
        if self.nalpha < 0:
            raise ValueError(f"nalpha must be >= 0, got {self.nalpha}")
        if self.dark1 < 0 or self.dark2 < 0:
            raise ValueError("dark occupations must be >= 0")
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"transmissivity out of [0,1]: {name}={v}")

    def replace(self, **changes) -> "DeviceParams":
        """Like dataclasses.replace but keeps ns and r consistent: changing
        one of them re-derives the other instead of tripping the check."""
        if "ns" in changes and "r" not in changes:
            changes["r"] = None
        if "r" in changes and "ns" not in changes:
            changes["ns"] = None
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return DeviceParams(**kw)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def lossless(self) -> bool:
        return self.eta1 == 1.0 and self.eta2 == 1.0 and self.dark1 == 0.0 and self.dark2 == 0.0


_INPUT_KINDS = ("fock", "thermal", "coherent", "vacuum")


@dataclass(frozen=True)
class InputState:
    """Tagged state fed to the unknown-input port of the squeezer.

    fock carries an exact photon number, thermal and coherent carry a mean
    photon number. vacuum, fock(0) and thermal(0) are interchangeable for
    every downstream moment.
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in _INPUT_KINDS:
            raise ValueError(f"unknown input kind {self.kind!r}, expected one of {_INPUT_KINDS}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"input mean must be finite and >= 0, got {self.value}")
        if self.kind == "fock" and self.value != int(self.value):
            raise ValueError(f"fock occupation must be an integer, got {self.value}")
        if self.kind == "vacuum" and self.value != 0:
            raise ValueError("vacuum carries no photons")

    @classmethod
    def fock(cls, n: int) -> "InputState":
        return cls("fock", float(n))

    @classmethod
    def thermal(cls, mean: float) -> "InputState":
        return cls("thermal", float(mean))

    @classmethod
    def coherent(cls, mean: float) -> "InputState":
        return cls("coherent", float(mean))

    @classmethod
    def vacuum(cls) -> "InputState":
        return cls("vacuum", 0.0)

    @property
    def mean(self) -> float:
        return self.value

    @property
    def is_gaussian(self) -> bool:
        """True when the state has a Gaussian phase-space representation."""
        return self.kind != "fock" or self.value == 0


@dataclass(frozen=True)
class SignalPoint:
    """One fully evaluated operating point of the detector."""

    N: float            # Fock occupation, or mean for thermal/coherent input
    c_mean: float       # intensity-intensity correlation <Na Nb>
    c_var: float        # its variance (lossless)
    snr: float
    g12: float          # <Na Nb> / (<Na><Nb>)
    na_mean: float
    nb_mean: float
    m_minus: float      # <Na - Nb>
    cov_ab: float
    corr_ab: float

    def __post_init__(self):
        if not math.isnan(self.c_var) and self.c_var < 0:
            raise ValueError(f"c_var must be >= 0, got {self.c_var}")
