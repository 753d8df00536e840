"""Conversion between dimensionless designs and laboratory geometry (SI units)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .sicsearch import TetraSolution, detector_positions

#: (wavelength, slit width) pairs in metres with the published geometry:
#: 2d [um], detection distance [cm], x3 [um], x4 [um].
TABLE2 = [
    ((650e-9, 100e-6), (553, 33.53, 63, 242)),
    ((780e-9, 62.5e-6), (346, 10.9, 39, 151)),
    ((826e-9, 60e-6), (332, 9.5, 38, 145)),
    ((810e-9, 40e-6), (221, 3.5, 25, 97)),
]

CSV_COLUMNS = ("lambda_nm", "a_um", "two_d_um", "z_det_cm", "x3_um", "x4_um")


@dataclass(frozen=True)
class PhysicalGeometry:
    """Laboratory geometry; every length in metres.

    ``z0`` is the Fresnel scale ``2 pi a^2 / lambda`` and ``z_det`` the
    slit-to-detector distance ``zeta * z0``.  Published tables sometimes label
    the latter ``z0``.
    """

    wavelength: float
    a: float
    two_d: float
    z_det: float
    x: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        for name in ("wavelength", "a", "two_d", "z_det"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def z0(self) -> float:
        return fresnel_scale(self.wavelength, self.a)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x"] = list(self.x)
        d["z0"] = self.z0
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicalGeometry":
        return cls(d["wavelength"], d["a"], d["two_d"], d["z_det"], tuple(d["x"]))

    def table_row(self) -> tuple[float, ...]:
        """Values in the published column order and units (nm, um, um, cm, um, um)."""
        return (
            self.wavelength * 1e9,
            self.a * 1e6,
            self.two_d * 1e6,
            self.z_det * 1e2,
            self.x[2] * 1e6,
            self.x[3] * 1e6,
        )


def fresnel_scale(wavelength: float, a: float) -> float:
    return 2 * np.pi * a**2 / wavelength


def to_physical(sol: TetraSolution, delta: float, wavelength: float, a: float) -> PhysicalGeometry:
    if not (wavelength > 0 and a > 0):
        raise ValueError("wavelength and slit width must be positive")
    xi = detector_positions(sol, delta)
    return PhysicalGeometry(
        wavelength=wavelength,
        a=a,
        two_d=2 * delta * a,
        z_det=sol.zeta * fresnel_scale(wavelength, a),
        x=tuple(xi * a),
    )


def from_physical(geom: PhysicalGeometry) -> tuple[float, float, np.ndarray]:
    """Recover ``(delta, zeta, xi)`` from a laboratory geometry."""
    return geom.two_d / (2 * geom.a), geom.z_det / geom.z0, np.array(geom.x) / geom.a


def format_length(metres: float) -> str:
    """Human-readable length in nm, um, mm, cm or m."""
    mag = abs(metres)
    for scale, unit in ((1, "m"), (1e-2, "cm"), (1e-3, "mm"), (1e-6, "um"), (1e-9, "nm")):
        if mag >= scale or unit == "nm":
            return f"{metres / scale:.4g} {unit}"
    raise AssertionError("unreachable")
