"""Rectilinear grids, complex fields and quadrature.

Grids are uniform and FFT-compatible: points run from -L/2 to L/2 - dx
(endpoint excluded) so that z = 0 is a grid point and spectral derivatives
apply directly.  Fields decay below 1e-8 of peak at the box edge, which
makes the plain Riemann/trapezoid weight dx spectrally accurate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, GridMismatchError


def _check_axis(n, name):
    if n < 16 or (n & (n - 1)) != 0:
        raise ConfigError(f"{name} must be a power of two >= 16, got {n}")


@dataclass(frozen=True)
class Grid1D:
    """Uniform longitudinal grid, symmetric about z = 0."""

    n: int
    z_half: float  # half extent; points span [-z_half, z_half - dz]

    def __post_init__(self):
        _check_axis(self.n, "n")
        if not (self.z_half > 0):
            raise ConfigError("z_half must be positive")

    @property
    def dz(self) -> float:
        return 2.0 * self.z_half / self.n

    @property
    def z(self) -> np.ndarray:
        return -self.z_half + self.dz * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dz)


@dataclass(frozen=True)
class Grid3D:
    """Uniform 3D grid; x, y transverse (equal extents), z longitudinal."""

    nx: int
    ny: int
    nz: int
    t_half: float  # transverse half extent (x and y)
    z_half: float

    def __post_init__(self):
        _check_axis(self.nx, "nx")
        _check_axis(self.ny, "ny")
        _check_axis(self.nz, "nz")
        if not (self.t_half > 0 and self.z_half > 0):
            raise ConfigError("grid extents must be positive")

    @property
    def dx(self):
        return 2.0 * self.t_half / self.nx

    @property
    def dy(self):
        return 2.0 * self.t_half / self.ny

    @property
    def dz(self):
        return 2.0 * self.z_half / self.nz

    @property
    def dvol(self):
        return self.dx * self.dy * self.dz

    @property
    def x(self):
        return -self.t_half + self.dx * np.arange(self.nx)

    @property
    def y(self):
        return -self.t_half + self.dy * np.arange(self.ny)

    @property
    def z(self):
        return -self.z_half + self.dz * np.arange(self.nz)

    def k_axes(self):
        kx = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)
        ky = 2.0 * np.pi * np.fft.fftfreq(self.ny, d=self.dy)
        kz = 2.0 * np.pi * np.fft.fftfreq(self.nz, d=self.dz)
        return kx, ky, kz

    def z_grid(self) -> Grid1D:
        return Grid1D(n=self.nz, z_half=self.z_half)

    def x_grid(self) -> Grid1D:
        return Grid1D(n=self.nx, z_half=self.t_half)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitudes on a grid. Treated as immutable after creation."""

    grid: object  # Grid1D or Grid3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", vals)
        expected = ((self.grid.n,) if isinstance(self.grid, Grid1D)
                    else (self.grid.nx, self.grid.ny, self.grid.nz))
        if vals.shape != expected:
            raise GridMismatchError(
                f"field shape {vals.shape} does not match grid {expected}")
        if not np.all(np.isfinite(vals.view(np.float64))):
            raise ContractError("field contains non-finite amplitudes")

    @property
    def weight(self) -> float:
        g = self.grid
        return g.dz if isinstance(g, Grid1D) else g.dvol

    def boundary_leak(self) -> float:
        """Max boundary amplitude relative to the peak amplitude."""
        a = np.abs(self.values)
        peak = a.max()
        if peak == 0:
            return 0.0
        if isinstance(self.grid, Grid1D):
            edge = max(a[0], a[-1])
        else:
            edge = max(a[0, :, :].max(), a[-1, :, :].max(),
                       a[:, 0, :].max(), a[:, -1, :].max(),
                       a[:, :, 0].max(), a[:, :, -1].max())
        return float(edge / peak)


def norm_squared(f: ComplexField) -> float:
    """Integral of |f|^2 over the grid."""
    return float(np.sum(np.abs(f.values) ** 2) * f.weight)


def normalized(f: ComplexField) -> ComplexField:
    return ComplexField(f.grid, f.values / np.sqrt(norm_squared(f)))


def eta_integral(f: ComplexField, norm_tol: float = 1e-6) -> float:
    """Quartic integral of a normalized field (eta_N in 3D, eta_L in 1D)."""
    nrm = norm_squared(f)
    if abs(nrm - 1.0) > norm_tol:
        raise ContractError(
            f"eta_integral requires a normalized field (|f|^2 = {nrm})")
    return float(np.sum(np.abs(f.values) ** 4) * f.weight)


def overlap(f: ComplexField, g: ComplexField) -> complex:
    """Inner product integral of f* g; both fields on the same grid."""
    if f.grid != g.grid:
        raise GridMismatchError("overlap requires identical grids")
    return complex(np.sum(np.conj(f.values) * g.values) * f.weight)


def marginal_longitudinal(f3: ComplexField) -> tuple[Grid1D, np.ndarray]:
    """q(z) = integral over x,y of |f3|^2; integrates to 1 over z."""
    g = f3.grid
    if not isinstance(g, Grid3D):
        raise ContractError("marginal_longitudinal needs a 3D field")
    dens = np.sum(np.abs(f3.values) ** 2, axis=(0, 1)) * g.dx * g.dy
    return g.z_grid(), dens


def marginal_transverse_x(f3: ComplexField) -> tuple[Grid1D, np.ndarray]:
    """q(x) = integral over y,z of |f3|^2."""
    g = f3.grid
    if not isinstance(g, Grid3D):
        raise ContractError("marginal_transverse_x needs a 3D field")
    dens = np.sum(np.abs(f3.values) ** 2, axis=(1, 2)) * g.dy * g.dz
    return g.x_grid(), dens


# --- box sizing ------------------------------------------------------------

def default_box(lam: float, z_tf: float, n3d=(32, 32, 512)) -> Grid3D:
    """Box sizing rule: longitudinal half extent max(8 harmonic lengths,
    1.5 * Thomas-Fermi half-width); transverse half extent 6 lT."""
    z_half = max(8.0 / np.sqrt(lam), 1.5 * z_tf)
    nx, ny, nz = n3d
    return Grid3D(nx=nx, ny=ny, nz=nz, t_half=6.0, z_half=z_half)


def default_box_1d(lam: float, z_tf: float, n: int = 4096) -> Grid1D:
    z_half = max(8.0 / np.sqrt(lam), 1.5 * z_tf)
    return Grid1D(n=n, z_half=z_half)


# --- serialization ---------------------------------------------------------

_MAGIC = b"BMLF"


def save_field(path, f: ComplexField) -> None:
    """Flat binary layout: magic, ndim, dims, extents, interleaved
    real/imag doubles with z the fastest axis."""
    g = f.grid
    with open(path, "wb") as fh:
        if isinstance(g, Grid1D):
            fh.write(_MAGIC + struct.pack("<i", 1))
            fh.write(struct.pack("<q d", g.n, g.z_half))
        else:
            fh.write(_MAGIC + struct.pack("<i", 3))
            fh.write(struct.pack("<3q 2d", g.nx, g.ny, g.nz,
                                 g.t_half, g.z_half))
        inter = np.empty(f.values.size * 2, dtype="<f8")
        flat = np.ravel(f.values, order="C")  # z fastest for (x, y, z) layout
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.tobytes())


def load_field(path) -> ComplexField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ContractError(f"{path}: not a bmlab field file")
        (ndim,) = struct.unpack("<i", fh.read(4))
        if ndim == 1:
            n, z_half = struct.unpack("<q d", fh.read(16))
            grid = Grid1D(n=n, z_half=z_half)
            shape = (n,)
        elif ndim == 3:
            nx, ny, nz, t_half, z_half = struct.unpack("<3q 2d", fh.read(40))
            grid = Grid3D(nx=nx, ny=ny, nz=nz, t_half=t_half, z_half=z_half)
            shape = (nx, ny, nz)
        else:
            raise ContractError(f"{path}: bad dimensionality {ndim}")
        inter = np.frombuffer(fh.read(), dtype="<f8")
        vals = (inter[0::2] + 1j * inter[1::2]).reshape(shape)
    return ComplexField(grid, vals)


def density_to_csv(path, grid: Grid1D, dens: np.ndarray, header_lines=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("z,density\n")
        for z, d in zip(grid.z, dens):
            fh.write(f"{float(z)!r},{float(d)!r}\n")
