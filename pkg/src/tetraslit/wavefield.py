"""Paraxial propagation of Gaussian double-slit modes.

All lengths are dimensionless: transverse ``xi = x / a`` and axial
``zeta = z / (k a**2)``.  Slit ``k=1`` is centred at ``-delta`` and slit
``k=2`` at ``+delta``.

The qubit basis is ``{|psi_1>, |psi_2>}`` and a state is stored as its Bloch
vector ``r`` with ``rho = (I + r.sigma) / 2``, so that ``rho[0, 1] =
(r_x - i r_y) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

PHYSICAL_ATOL = 1e-9


@dataclass(frozen=True)
class SlitConfig:
    """Double slit with unit-width Gaussian slits a distance ``2*delta`` apart."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class BlochState:
    """Qubit density matrix stored as a Bloch vector."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        if not np.all(np.isfinite(r)):
            raise ValueError("Bloch vector must be finite")
        if np.linalg.norm(r) > 1 + PHYSICAL_ATOL:
            raise ValueError(f"unphysical Bloch vector, |r| = {np.linalg.norm(r):.6g} > 1")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "BlochState":
        rho = np.asarray(rho, dtype=complex)
        return cls(np.real(np.einsum("kij,ji->k", PAULI, rho)))

    @classmethod
    def mixed(cls) -> "BlochState":
        return cls(np.zeros(3))

    @classmethod
    def slit(cls, k: int) -> "BlochState":
        """Pure state with the photon in slit ``k`` only."""
        _check_slit(k)
        return cls(np.array([0.0, 0.0, 1.0 if k == 1 else -1.0]))

    @property
    def matrix(self) -> np.ndarray:
        return bloch_to_matrix(self.r)

    @property
    def purity(self) -> float:
        return 0.5 * (1 + float(self.r @ self.r))


@dataclass(frozen=True)
class SampledField:
    """Complex field sampled on a uniform transverse grid."""

    grid: np.ndarray
    values: np.ndarray
    error_estimate: float | None = field(default=None, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        steps = np.diff(grid)
        if not np.all(steps > 0):
            raise ValueError("grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("grid must be uniformly spaced")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def norm(self) -> float:
        """Squared L2 norm by the trapezoidal rule."""
        return float(np.trapezoid(np.abs(self.values) ** 2, dx=self.spacing))

    def shifted(self, offset: float) -> "SampledField":
        return SampledField(self.grid + offset, self.values, self.error_estimate)


def bloch_to_matrix(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 0.5 * (np.eye(2) + np.einsum("...k,kij->...ij", r, PAULI))


def matrix_to_bloch(rho) -> np.ndarray:
    return np.real(np.einsum("kij,...ji->...k", PAULI, np.asarray(rho, dtype=complex)))


def _check_slit(k):
    if k not in (1, 2):
        raise ValueError(f"slit index must be 1 or 2, got {k!r}")


def _check_zeta(zeta):
    if np.any(np.asarray(zeta) < 0):
        raise ValueError("zeta must be non-negative")


def _centre(k, delta):
    return -delta if k == 1 else delta


def slit_mode(k: int, xi, delta: float):
    """Normalised Gaussian amplitude of slit ``k`` on the slit plane."""
    _check_slit(k)
    xi = np.asarray(xi, dtype=float)
    return np.pi ** -0.25 * np.exp(-0.5 * (xi - _centre(k, delta)) ** 2)


def propagate_mode(k: int, xi, zeta, delta: float):
    """Closed-form paraxial propagation of slit mode ``k`` to plane ``zeta``.

    Returns complex amplitudes broadcast over ``xi`` and ``zeta``.  The square
    root of ``sqrt(pi) * (1 + i zeta)`` is taken on the principal branch.
    """
    _check_slit(k)
    _check_zeta(zeta)
    xi = np.asarray(xi, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    u = xi - _centre(k, delta)
    q = 1 + 1j * zeta
    return np.exp(-(1 - 1j * zeta) * u**2 / (2 * (1 + zeta**2))) / np.sqrt(np.sqrt(np.pi) * q)


def default_grid(zeta: float, delta: float, spacing: float = 0.005, n_sigma: float = 8.0) -> np.ndarray:
    """Uniform grid covering both propagated modes out to ``n_sigma`` deviations."""
    half = n_sigma * np.sqrt((1 + zeta**2) / 2) + delta
    n = int(np.ceil(half / spacing))
    return spacing * np.arange(-n, n + 1)


def _fresnel_sum(grid, values, h, out, zeta, chunk):
    # kernel exp(i (x - x')^2 / (2 zeta)) / sqrt(2 pi i zeta), trapezoid weights
    weights = np.full(grid.size, h)
    weights[0] = weights[-1] = h / 2
    src = values * weights
    pref = 1 / np.sqrt(2j * np.pi * zeta)
    result = np.empty(out.size, dtype=complex)
    for start in range(0, out.size, chunk):
        x = out[start : start + chunk, None]
        result[start : start + chunk] = np.exp(0.5j * (x - grid[None, :]) ** 2 / zeta) @ src
    return pref * result


def fresnel_propagate(
    field: SampledField,
    zeta: float,
    out_grid=None,
    *,
    chunk: int = 1024,
    estimate_error: bool = True,
) -> SampledField:
    """Propagate a sampled slit-plane field by direct quadrature of the Fresnel integral.

    Args:
        field: input amplitude on the slit plane.  Its grid must cover the
            support of the input; nothing outside the grid contributes.
        zeta: propagation distance.  ``zeta == 0`` returns ``field`` unchanged.
        out_grid: output sample points.  Defaults to the input grid.
        chunk: number of output points evaluated per matrix product.
        estimate_error: when true, repeat the quadrature on every second input
            sample and store the max-abs difference as ``error_estimate``.
    """
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    if zeta == 0:
        return field
    out = field.grid if out_grid is None else np.asarray(out_grid, dtype=float)
    h = field.spacing
    values = _fresnel_sum(field.grid, field.values, h, out, zeta, chunk)
    err = None
    if estimate_error and field.grid.size >= 5:
        m = field.grid.size - 1 - (field.grid.size - 1) % 2
        coarse = _fresnel_sum(field.grid[: m + 1 : 2], field.values[: m + 1 : 2], 2 * h, out, zeta, chunk)
        err = float(np.max(np.abs(coarse - values)))
    return SampledField(out, values, err)


def intensity_envelope(xi, zeta, delta: float):
    """Sum of the two propagated mode intensities.

    Evaluated as the mean of two Gaussians, which equals the
    ``exp * cosh`` form without overflowing for large ``|xi|``.
    """
    _check_zeta(zeta)
    xi = np.asarray(xi, dtype=float)
    s = 1 + np.asarray(zeta, dtype=float) ** 2
    return (np.exp(-((xi - delta) ** 2) / s) + np.exp(-((xi + delta) ** 2) / s)) / np.sqrt(np.pi * s)


def w_of(xi, zeta, delta: float):
    return 2 * np.asarray(xi, dtype=float) * delta / (1 + np.asarray(zeta, dtype=float) ** 2)


def _sech(w):
    e = np.exp(-2 * np.abs(w))
    return 2 * np.exp(-np.abs(w)) / (1 + e)


def bloch_of_w(w, zeta) -> np.ndarray:
    """Bloch vector of the measurement state at reduced coordinate ``w``.

    Output has shape ``broadcast(w, zeta).shape + (3,)``.
    """
    w = np.asarray(w, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    sech = _sech(w)
    phase = w * zeta
    return np.stack(np.broadcast_arrays(sech * np.cos(phase), sech * np.sin(phase), -np.tanh(w)), axis=-1)


def bloch_of_xi(xi, zeta, delta: float) -> np.ndarray:
    return bloch_of_w(w_of(xi, zeta, delta), zeta)


def projector_of(xi, zeta, delta: float) -> np.ndarray:
    """Rank-1 measurement projector at ``(xi, zeta)`` in the slit basis."""
    _check_zeta(zeta)
    w = w_of(xi, zeta, delta)
    zeta = np.asarray(zeta, dtype=float)
    t = np.tanh(w)
    off = _sech(w) * np.exp(-1j * w * zeta)
    out = np.empty(np.broadcast(w, zeta).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5 * (1 - t)
    out[..., 1, 1] = 0.5 * (1 + t)
    out[..., 0, 1] = 0.5 * off
    out[..., 1, 0] = 0.5 * np.conj(off)
    return out


def _as_bloch(rho) -> np.ndarray:
    if isinstance(rho, BlochState):
        return rho.r
    return BlochState(rho).r


def detection_pdf(rho, xi, zeta, delta: float):
    """Probability density of detecting the photon at ``xi`` on plane ``zeta``.

    ``rho`` is a :class:`BlochState` or a Bloch 3-vector; unphysical vectors
    raise ``ValueError``.
    """
    r = _as_bloch(rho)
    population = 0.5 * (1 + bloch_of_xi(xi, zeta, delta) @ r)
    return intensity_envelope(xi, zeta, delta) * population


def detection_pdf_from_modes(rho, xi, zeta, delta: float):
    """Same density as :func:`detection_pdf`, built from ``sum rho_ij psi_i psi_j*``."""
    m = bloch_to_matrix(_as_bloch(rho))
    psi = np.stack([propagate_mode(1, xi, zeta, delta), propagate_mode(2, xi, zeta, delta)], axis=-1)
    return np.real(np.einsum("...i,ij,...j->...", psi, m, np.conj(psi)))


def mode_overlap(delta: float) -> float:
    """``<psi_1|psi_2>``; independent of ``zeta`` by unitarity."""
    return float(np.exp(-(delta**2)))
