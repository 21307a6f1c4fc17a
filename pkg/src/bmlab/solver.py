"""Ground-state solvers and the coupled two-mode real-time propagator.

Everything runs in internal units (lengths in lT, times in 1/omega_T,
energies in hbar*omega_T).  The scheme is Strang-split spectral stepping:
kinetic half-steps in Fourier space, potential + nonlinearity in position
space.  Imaginary time uses a decreasing-dt ramp ending at the requested
step so that slow longitudinal modes relax in reasonable wall time while
the final Trotter bias is set by the small step.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .analytic import eta_T_gaussian, thomas_fermi
from .config import ScaledConfig
from .errors import ConfigError, ContractError, ConvergenceError
from .grids import ComplexField, Grid1D, Grid3D, norm_squared, normalized


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BMLAB_THREADS", "1")))
    except ValueError:
        return 1


def _fftn(a):
    return sfft.fftn(a, workers=_workers())


def _ifftn(a):
    return sfft.ifftn(a, workers=_workers())


def _k2_half(grid) -> np.ndarray:
    """k^2 / 2 on the FFT grid (the kinetic symbol)."""
    if isinstance(grid, Grid1D):
        return 0.5 * grid.k**2
    kx, ky, kz = grid.k_axes()
    return 0.5 * (kx[:, None, None] ** 2 + ky[None, :, None] ** 2
                  + kz[None, None, :] ** 2)


def trap_potential(grid, lam: float) -> np.ndarray:
    if isinstance(grid, Grid1D):
        return 0.5 * lam**2 * grid.z**2
    x, y, z = grid.x, grid.y, grid.z
    return (0.5 * (x[:, None, None] ** 2 + y[None, :, None] ** 2)
            + 0.5 * lam**2 * z[None, None, :] ** 2)


def apply_hamiltonian(grid, V, geff, psi):
    """GP Hamiltonian action (-lap/2 + V + geff |psi|^2) psi."""
    kin = _ifftn(_k2_half(grid) * _fftn(psi))
    return kin + (V + geff * np.abs(psi) ** 2) * psi


def gp_energy_terms(grid, V, geff, psi, weight):
    """(E_kin, E_trap, E_int) of a normalized field."""
    ft = _fftn(psi)
    kin = _ifftn(_k2_half(grid) * ft)
    e_kin = float(np.real(np.sum(np.conj(psi) * kin)) * weight)
    dens = np.abs(psi) ** 2
    e_trap = float(np.sum(V * dens) * weight)
    e_int = float(0.5 * geff * np.sum(dens**2) * weight)
    return e_kin, e_trap, e_int


@dataclass(frozen=True)
class GroundStateResult:
    field: ComplexField
    mu: float
    residual: float
    iterations: int


def _descent_polish(grid, V, geff, psi, res_tol, step=0.5, max_iter=50000):
    """Preconditioned steepest descent with renormalization.

    psi <- normalize(psi - step * P (H psi - mu psi)), with P the inverse
    shifted kinetic symbol in Fourier space.  Unlike split stepping, its
    fixed point is the exact discrete GP eigenpair, so the residual can be
    driven to `res_tol` without a time-step bias floor.
    """
    weight = grid.dz if isinstance(grid, Grid1D) else grid.dvol
    k2h = _k2_half(grid)
    psi = np.asarray(psi, dtype=np.complex128).copy()
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * weight)
    amax = np.max(np.abs(psi))
    shift = 1.0 + float(np.max(V[np.abs(psi) > 1e-6 * amax]))
    res = math.inf
    mu = math.nan
    for it in range(max_iter):
        hpsi = apply_hamiltonian(grid, V, geff, psi)
        mu = float(np.real(np.sum(np.conj(psi) * hpsi)) * weight)
        r = hpsi - mu * psi
        res = math.sqrt(float(np.sum(np.abs(r) ** 2)) * weight)
        if res < res_tol:
            return psi, mu, res, it + 1
        psi = psi - step * _ifftn(_fftn(r) / (k2h + shift))
        psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * weight)
    raise ConvergenceError(
        f"descent polish did not reach residual {res_tol:g} in {max_iter} "
        f"iterations (residual {res:.3e})", residual=res, iterations=max_iter)


def _imaginary_time(grid, V, geff, psi0, dt, tol, max_iter, ramp,
                    res_tol=None):
    """Normalized imaginary-time split-step relaxation.

    Convergence: per-step change of the chemical-potential estimate (from
    the norm decay rate) below the stage tolerance, at the final dt.

    The split-step fixed point carries a dt-dependent bias, so `res_tol`
    selects a refinement mode: with res_tol = 0.0 the split stepping
    simply continues until the GP residual norm stalls (its own floor at
    this dt, no other scheme involved); with res_tol > 0 the split
    stepping continues until the residual drops below res_tol, falling
    back to preconditioned descent if it stalls first.
    """
    weight = grid.dz if isinstance(grid, Grid1D) else grid.dvol
    k2h = _k2_half(grid)
    psi = np.asarray(psi0, dtype=np.complex128).copy()
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * weight)

    if ramp:
        stages = [(50.0 * dt, max(1e4 * tol, 1e-8)),
                  (10.0 * dt, max(1e2 * tol, 1e-10)),
                  (dt, tol)]
    else:
        stages = [(dt, tol)]

    total_iters = 0
    for dt_s, tol_s in stages:
        kin_half = np.exp(-0.5 * dt_s * k2h)
        mu_prev = None
        converged = False
        for _ in range(max_iter):
            psi = _ifftn(kin_half * _fftn(psi))
            psi *= np.exp(-dt_s * (V + geff * np.abs(psi) ** 2))
            psi = _ifftn(kin_half * _fftn(psi))
            nrm2 = float(np.sum(np.abs(psi) ** 2)) * weight
            psi /= math.sqrt(nrm2)
            mu_est = -0.5 * math.log(nrm2) / dt_s
            total_iters += 1
            if mu_prev is not None and abs(mu_est - mu_prev) < tol_s:
                converged = True
                break
            mu_prev = mu_est
        if not converged:
            hpsi = apply_hamiltonian(grid, V, geff, psi)
            mu = float(np.real(np.sum(np.conj(psi) * hpsi)) * weight)
            res = math.sqrt(float(np.sum(np.abs(hpsi - mu * psi) ** 2)) * weight)
            raise ConvergenceError(
                f"imaginary-time stage (dt={dt_s:g}) did not converge in "
                f"{max_iter} iterations; last residual {res:.3e}",
                residual=res, iterations=total_iters)

    if res_tol is not None:
        kin_half = np.exp(-0.5 * dt * k2h)

        def residual_of(p):
            hp = apply_hamiltonian(grid, V, geff, p)
            m = float(np.real(np.sum(np.conj(p) * hp)) * weight)
            return math.sqrt(float(np.sum(np.abs(hp - m * p) ** 2)) * weight)

        res_prev = residual_of(psi)
        stalled = res_prev < res_tol
        while not stalled:
            for _ in range(200):
                psi = _ifftn(kin_half * _fftn(psi))
                psi *= np.exp(-dt * (V + geff * np.abs(psi) ** 2))
                psi = _ifftn(kin_half * _fftn(psi))
                psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * weight)
            total_iters += 200
            res = residual_of(psi)
            if res < res_tol:
                break
            if res > (1.0 - 1e-3) * res_prev:
                stalled = True   # split-step floor reached for this dt
            res_prev = res
            if total_iters > max_iter:
                raise ConvergenceError(
                    f"residual continuation exceeded {max_iter} iterations "
                    f"(residual {res:.3e})", residual=res,
                    iterations=total_iters)
        if stalled and res_tol > 0.0:
            psi, mu, res, polish_iters = _descent_polish(grid, V, geff, psi,
                                                         res_tol)
            return psi, mu, res, total_iters + polish_iters

    hpsi = apply_hamiltonian(grid, V, geff, psi)
    mu = float(np.real(np.sum(np.conj(psi) * hpsi)) * weight)
    res = math.sqrt(float(np.sum(np.abs(hpsi - mu * psi) ** 2)) * weight)
    return psi, mu, res, total_iters


def transverse_gaussian(grid: Grid3D) -> np.ndarray:
    """chi0(x, y) factor, normalized in 2D (internal units, rho0 = 1/sqrt2)."""
    x, y = grid.x, grid.y
    return (np.exp(-0.5 * (x[:, None] ** 2 + y[None, :] ** 2))
            / math.sqrt(math.pi))


def _default_init_1d(s: ScaledConfig, eta_T, grid1, geff):
    z = grid1.z
    if geff > 0:
        tf = thomas_fermi(s, eta_T, grid1)
        base = np.sqrt(tf.q0)
        width = max(1.0 / math.sqrt(s.lam), 1.0)
    else:
        base = 0.0
        width = 1.0 / math.sqrt(s.lam)
    guess = base + 1e-2 * np.exp(-0.5 * (z / width) ** 2)
    return guess.astype(np.complex128)


def ground_state_reduced_1d(s: ScaledConfig, eta_T: float, grid1: Grid1D,
                            dt: float = 1e-3, tol: float = 1e-10,
                            max_iter: int = 200000, psi0=None,
                            g_override: float | None = None,
                            ramp: bool = True,
                            res_tol: float | None = None) -> GroundStateResult:
    """Ground state of the reduced longitudinal GP equation."""
    if not (eta_T > 0):
        raise ContractError("eta_T must be positive")
    g = s.g11 if g_override is None else g_override
    geff = (s.N - 1) * g * eta_T
    V = trap_potential(grid1, s.lam)
    if psi0 is None:
        psi0 = _default_init_1d(s, eta_T, grid1, geff)
    psi, mu, res, iters = _imaginary_time(grid1, V, geff, psi0, dt, tol,
                                          max_iter, ramp, res_tol=res_tol)
    return GroundStateResult(field=ComplexField(grid1, psi), mu=mu,
                             residual=res, iterations=iters)


def ground_state_reduced_1d_scf(s: ScaledConfig, eta_T: float, grid1: Grid1D,
                                tol: float = 1e-12, step: float = 0.5,
                                max_iter: int = 50000) -> GroundStateResult:
    """Independent scheme: direct nonlinear relaxation on the same grid.

    Preconditioned steepest descent on the GP energy with renormalization:
    phi <- normalize(phi - step * P (H[phi] phi - mu phi)), where P is the
    inverse shifted kinetic operator in Fourier space.  Its fixed point is
    the exact discrete eigenpair (no operator-splitting bias), which makes
    it a true cross-check for the split-step relaxation.

    `tol` bounds the residual norm ||H phi - mu phi||.
    """
    geff = (s.N - 1) * s.g11 * eta_T
    V = trap_potential(grid1, s.lam)
    k2h = _k2_half(grid1)
    dz = grid1.dz

    phi = np.abs(_default_init_1d(s, eta_T, grid1, geff)).astype(float)
    phi /= math.sqrt(float(np.sum(phi**2)) * dz)
    shift = 1.0 + float(np.max(V[np.abs(phi) > 1e-6 * np.max(phi)]))
    res = math.inf
    for it in range(max_iter):
        hphi = (np.real(sfft.ifft(k2h * sfft.fft(phi)))
                + (V + geff * phi**2) * phi)
        mu = float(np.sum(phi * hphi) * dz)
        r = hphi - mu * phi
        res = math.sqrt(float(np.sum(r**2)) * dz)
        if res < tol:
            break
        pr = np.real(sfft.ifft(sfft.fft(r) / (k2h + shift)))
        phi = phi - step * pr
        phi /= math.sqrt(float(np.sum(phi**2)) * dz)
        if phi[grid1.n // 2] < 0:
            phi = -phi
    else:
        raise ConvergenceError(
            f"nonlinear relaxation did not converge in {max_iter} "
            f"iterations (residual {res:.3e})",
            residual=res, iterations=max_iter)

    psi = phi.astype(np.complex128)
    return GroundStateResult(field=ComplexField(grid1, psi), mu=mu,
                             residual=res, iterations=it + 1)


def ground_state_3d(s: ScaledConfig, grid3: Grid3D, dt: float = 1e-3,
                    tol: float = 1e-10, max_iter: int = 200000, psi0=None,
                    g_override: float | None = None,
                    ramp: bool = True,
                    res_tol: float | None = None) -> GroundStateResult:
    """Full 3D GP ground state with coupling g11 (all atoms in mode 1).

    Default initial guess is the product ansatz: transverse Gaussian times
    the relaxed reduced-1D profile, which leaves only fast transverse and
    small longitudinal corrections for the 3D relaxation.
    """
    g = s.g11 if g_override is None else g_override
    geff = (s.N - 1) * g
    V = trap_potential(grid3, s.lam)
    if psi0 is None:
        chi = transverse_gaussian(grid3)
        if geff > 0:
            eta_T = eta_T_gaussian(s.rho0)
            pres = ground_state_reduced_1d(
                s, eta_T, grid3.z_grid(), dt=dt, tol=max(tol, 1e-10),
                max_iter=max_iter, g_override=g)
            longi = pres.field.values
        else:
            zz = grid3.z
            sig = 1.0 / math.sqrt(s.lam)
            longi = np.exp(-0.25 * (zz / sig) ** 2)  # deliberately wide
        psi0 = chi[:, :, None] * longi[None, None, :]
    psi, mu, res, iters = _imaginary_time(grid3, V, geff, psi0, dt, tol,
                                          max_iter, ramp, res_tol=res_tol)
    return GroundStateResult(field=ComplexField(grid3, psi), mu=mu,
                             residual=res, iterations=iters)


# --- real-time coupled propagation -----------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Sampled overlap signal of the coupled two-mode evolution."""

    times: np.ndarray        # internal units, uniform, starts at 0
    overlap: np.ndarray      # complex O(t_i)
    p1: np.ndarray
    p2: np.ndarray

    def o_imag(self) -> np.ndarray:
        return np.imag(self.overlap)

    def to_csv(self, path, omega_T: float, header_lines=()):
        with open(path, "w", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("t_si,t_internal,ReO,ImO,p1,p2\n")
            for t, o, a, b in zip(self.times, self.overlap, self.p1, self.p2):
                fh.write(f"{float(t) / omega_T!r},{float(t)!r},"
                         f"{float(o.real)!r},{float(o.imag)!r},"
                         f"{float(a)!r},{float(b)!r}\n")


def populations(O_imag: float) -> tuple[float, float]:
    """p_{1,2} = (1 +/- Im O) / 2."""
    if abs(O_imag) > 1.0 + 1e-12:
        raise ContractError(f"|Im O| = {abs(O_imag)} exceeds 1")
    x = min(1.0, max(-1.0, O_imag))
    return 0.5 * (1.0 + x), 0.5 * (1.0 - x)


def timestep_drift(grid3: Grid3D, lam: float, dt: float,
                   steps: int = 100) -> float:
    """Relative energy drift of a g = 0 coherent state over `steps` steps;
    used as the stability guard for the real-time step."""
    V = trap_potential(grid3, lam)
    k2h = _k2_half(grid3)
    chi = transverse_gaussian(grid3)
    z = grid3.z
    sig = 1.0 / math.sqrt(lam)
    longi = np.exp(-0.25 * ((z - 0.5 * sig) / sig) ** 2)
    psi = (chi[:, :, None] * longi[None, None, :]).astype(np.complex128)
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * grid3.dvol)
    e0 = sum(gp_energy_terms(grid3, V, 0.0, psi, grid3.dvol))
    kin_half = np.exp(-0.5j * dt * k2h)
    pot = np.exp(-1j * dt * V)
    for _ in range(steps):
        psi = _ifftn(kin_half * _fftn(psi))
        psi *= pot
        psi = _ifftn(kin_half * _fftn(psi))
    e1 = sum(gp_energy_terms(grid3, V, 0.0, psi, grid3.dvol))
    return abs(e1 - e0) / abs(e0)


def propagate_coupled(psi_init: ComplexField, s: ScaledConfig, t_end: float,
                      dt: float = 1e-3, sample_every: int = 20,
                      check_dt: bool = False,
                      norm_tol: float = 1e-8) -> Trajectory:
    """Evolve both hyperfine modes from the shared initial profile and
    record the overlap O(t) = <psi_1|psi_2> at sampled times.

    Both modes start as the (normalized) g11 ground state; the equal
    population split is carried by the (N-1)/2 factor in the coupled
    equations.  Kinetic half-steps adjacent between samples are merged
    into full steps.
    """
    grid = psi_init.grid
    if not isinstance(grid, Grid3D):
        raise ContractError("propagate_coupled expects a 3D field")
    if sample_every < 1:
        raise ConfigError("sample_every must be >= 1")
    if check_dt and timestep_drift(grid, s.lam, dt) > 1e-4:
        raise ConfigError(f"real-time step dt={dt:g} fails the g=0 "
                          "energy-drift check (> 1e-4)")

    w = grid.dvol
    half = 0.5 * (s.N - 1)
    V = trap_potential(grid, s.lam)
    k2h = _k2_half(grid)
    kin_half = np.exp(-0.5j * dt * k2h)
    kin_full = kin_half * kin_half

    psi1 = psi_init.values / math.sqrt(norm_squared(psi_init))
    psi2 = psi1.copy()

    n_steps = int(round(t_end / dt))
    n_blocks = max(1, (n_steps + sample_every - 1) // sample_every)

    times = [0.0]
    overlaps = [complex(np.sum(np.conj(psi1) * psi2) * w)]

    def nonlinear(p1, p2):
        n1 = np.abs(p1) ** 2
        n2 = np.abs(p2) ** 2
        p1 *= np.exp(-1j * dt * (V + half * (s.g11 * n1 + s.g12 * n2)))
        p2 *= np.exp(-1j * dt * (V + half * (s.g12 * n1 + s.g22 * n2)))

    steps_done = 0
    for _ in range(n_blocks):
        block = min(sample_every, n_steps - steps_done)
        if block <= 0:
            break
        psi1 = _ifftn(kin_half * _fftn(psi1))
        psi2 = _ifftn(kin_half * _fftn(psi2))
        for j in range(block):
            nonlinear(psi1, psi2)
            fac = kin_full if j < block - 1 else kin_half
            psi1 = _ifftn(fac * _fftn(psi1))
            psi2 = _ifftn(fac * _fftn(psi2))
        steps_done += block
        for p in (psi1, psi2):
            drift = abs(float(np.sum(np.abs(p) ** 2)) * w - 1.0)
            if drift > norm_tol:
                raise ConvergenceError(
                    f"mode norm drift {drift:.3e} exceeds {norm_tol} at "
                    f"t = {steps_done * dt:g}", residual=drift,
                    iterations=steps_done)
        times.append(steps_done * dt)
        overlaps.append(complex(np.sum(np.conj(psi1) * psi2) * w))

    times = np.asarray(times)
    overlaps = np.asarray(overlaps)
    im = np.clip(np.imag(overlaps), -1.0, 1.0)
    return Trajectory(times=times, overlap=overlaps,
                      p1=0.5 * (1.0 + im), p2=0.5 * (1.0 - im))
