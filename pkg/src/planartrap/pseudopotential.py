"""Secular (pseudo)potential analysis.

The time-averaged potential governing the slow ion motion is

    psi = Q^2/(4 m Omega^2) |grad phi_RF|^2 + Q phi_DC   (J)

from which the trap minimum and its height r0, the trap depth (lowest
sub-level of psi connecting the minimum to the domain boundary), the escape
direction, the secular frequencies, and the dimensionless design quantities

    d = depth * 4 m Omega^2 r^2 / (Q V)^2
    f = omega * sqrt(2) m r^2 Omega / (Q V)
    u = (4 m r1^2 Omega^2 / (Q V^2)) * (r1/h) * U

are derived.  d = f = 1 for a perfect quadrupole trap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np
from scipy import ndimage

from .constants import EV
from .errors import (NormalizationError, NoTrapError, SaddleNotMinimumError,
                     ValidationError)
from .fieldsolver import GridSpec, PotentialField, grid_gradient
from .geometry import IonSpecies

_4CONN = ndimage.generate_binary_structure(2, 1)


class EscapeDirection(Enum):
    UP = "up"
    SIDE = "side"
    DOWN = "down"
    NONE = "none"    # untrapped / zero depth


@dataclass(frozen=True)
class DriveConfig:
    """RF amplitude V, drive frequency Omega, plate bias U, control voltages."""

    rf_amplitude: float
    omega: float
    top_plate_voltage: float = 0.0
    dc_voltages: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.omega <= 0:
            raise ValidationError(f"drive frequency must be positive, got {self.omega}")
        if self.rf_amplitude < 0:
            raise ValidationError(f"RF amplitude must be nonnegative, got {self.rf_amplitude}")


@dataclass(frozen=True)
class MinimumResult:
    point: tuple[float, float]
    r0: float
    value: float
    index: tuple[int, int]


@dataclass(frozen=True)
class DepthResult:
    depth: float
    escape: EscapeDirection
    level: float
    saddle: Optional[tuple[float, float]]
    untrapped: bool = False


@dataclass(frozen=True)
class SecularMap:
    psi: np.ndarray
    grid: GridSpec
    minimum: tuple[float, float]
    r0: float
    depth: float
    escape: EscapeDirection
    omega: tuple[float, float]
    saddle: Optional[tuple[float, float]]
    untrapped: bool = False


def secular_potential(fieldv: PotentialField, ion: IonSpecies, omega_rf: float) -> np.ndarray:
    """psi on the grid, in joules."""
    if omega_rf <= 0:
        raise ValidationError("omega_rf must be positive")
    gx, gy = grid_gradient(fieldv.phi_rf, fieldv.grid)
    psi = (ion.charge ** 2 / (4 * ion.mass * omega_rf ** 2)) * (gx * gx + gy * gy)
    if np.any(fieldv.phi_dc):
        psi = psi + ion.charge * fieldv.phi_dc
    return psi


def find_minimum(psi: np.ndarray, grid: GridSpec, roi=None) -> MinimumResult:
    """Lowest interior local minimum, refined to sub-grid accuracy.

    roi = ((x_lo, x_hi), (y_lo, y_hi)) restricts the search to the trapping
    region; the default excludes one boundary cell all around.
    """
    ny, nx = psi.shape
    xs, ys = grid.x, grid.y
    if roi is None:
        roi = ((xs[1], xs[-2]), (ys[1], ys[-2]))
    (xlo, xhi), (ylo, yhi) = roi
    mask = np.ones_like(psi, dtype=bool)
    mask[:, (xs < xlo) | (xs > xhi)] = False
    mask[(ys < ylo) | (ys > yhi), :] = False
    mask[0, :] = mask[-1, :] = False
    mask[:, 0] = mask[:, -1] = False
    if not mask.any():
        raise NoTrapError("empty search region")

    masked = np.where(mask, psi, np.inf)
    j, i = np.unravel_index(np.argmin(masked), psi.shape)
    centre = psi[j, i]
    neighbourhood = psi[j - 1:j + 2, i - 1:i + 2]
    if centre > neighbourhood.min() + 1e-30:
        raise NoTrapError("no interior local minimum in the search region")

    # quadratic sub-grid refinement, one axis at a time
    def refine(vm, vc, vp, h):
        denom = vm - 2 * vc + vp
        if denom <= 0:
            return 0.0, vc
        off = 0.5 * (vm - vp) / denom
        off = float(np.clip(off, -0.5, 0.5))
        val = vc - 0.25 * (vm - vp) * off
        return off * h, val

    off_x, val_x = refine(psi[j, i - 1], centre, psi[j, i + 1], grid.dx)
    off_y, val_y = refine(psi[j - 1, i], centre, psi[j + 1, i], grid.dy)
    value = min(val_x, val_y)
    x0 = xs[i] + off_x
    y0 = ys[j] + off_y
    return MinimumResult(point=(x0, y0), r0=y0, value=value, index=(j, i))


def trap_depth(psi: np.ndarray, grid: GridSpec, minimum: MinimumResult,
               rel_tol: float = 1e-4, max_bisect: int = 200) -> DepthResult:
    """Depth via bisection on the level with flood-fill connectivity (4-conn).

    depth = (lowest level whose sub-level set connects the minimum to the
    domain boundary) - psi(minimum).  The escape direction is classified
    from the saddle (the bottleneck of the connecting path) relative to the
    minimum: |dx| > |dy| -> SIDE, otherwise UP/DOWN by the sign of dy.
    """
    seed = minimum.index
    pmin = minimum.value
    ptop = float(psi.max())
    if not np.isfinite(ptop):
        raise ValidationError("psi contains non-finite values")

    border = np.zeros_like(psi, dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True

    def min_component(level):
        lab, _ = ndimage.label(psi < level, structure=_4CONN)
        lid = lab[seed]
        return lab, lid

    def connected(level):
        lab, lid = min_component(level)
        return lid != 0 and bool((lab[border] == lid).any())

    scale = max(abs(pmin), abs(ptop), 1e-300)
    lo = pmin + 1e-12 * scale
    hi = ptop * (1 + 1e-12) + 1e-12 * scale
    if connected(lo):
        return DepthResult(depth=0.0, escape=EscapeDirection.NONE, level=lo,
                           saddle=None, untrapped=True)
    if not connected(hi):
        raise NoTrapError("minimum never connects to the boundary")

    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if connected(mid):
            hi = mid
        else:
            lo = mid
        depth_est = max(lo - pmin, 1e-300)
        if hi - lo <= rel_tol * depth_est:
            break

    saddle_idx = _find_saddle(psi, seed, lo, hi, border)
    xs, ys = grid.x, grid.y
    saddle = (float(xs[saddle_idx[1]]), float(ys[saddle_idx[0]]))
    dx = saddle[0] - minimum.point[0]
    dy = saddle[1] - minimum.point[1]
    if abs(dx) > abs(dy):
        escape = EscapeDirection.SIDE
    elif dy > 0:
        escape = EscapeDirection.UP
    else:
        escape = EscapeDirection.DOWN
    return DepthResult(depth=lo - pmin, escape=escape, level=lo, saddle=saddle)


def _find_saddle(psi, seed, lo, hi, border):
    """Bottleneck cell where the minimum's basin first joins a boundary basin."""
    lab_lo, _ = ndimage.label(psi < lo, structure=_4CONN)
    a_id = lab_lo[seed]
    a_mask = lab_lo == a_id
    border_ids = set(np.unique(lab_lo[border])) - {0, a_id}

    lab_hi, _ = ndimage.label(psi < hi, structure=_4CONN)
    region = lab_hi == lab_hi[seed]

    if border_ids:
        c_mask = np.isin(lab_lo, sorted(border_ids)) & region
    else:
        # boundary basin appears only at the connecting level: the region
        # touches the border directly; the saddle is the cheapest border cell
        touch = region & border
        if touch.any():
            vals = np.where(touch, psi, np.inf)
            return np.unravel_index(np.argmin(vals), psi.shape)
        c_mask = np.zeros_like(region)

    bridge = region & (psi >= lo) & ~a_mask
    frontier = ndimage.binary_dilation(a_mask, structure=_4CONN) & bridge
    visited = frontier.copy()
    for _ in range(psi.size):
        if not frontier.any():
            break
        reach = ndimage.binary_dilation(frontier, structure=_4CONN)
        meet = reach & c_mask
        if meet.any():
            cand = ndimage.binary_dilation(meet, structure=_4CONN) & visited
            pool = cand if cand.any() else frontier
            vals = np.where(pool, psi, -np.inf)
            return np.unravel_index(np.argmax(vals), psi.shape)
        frontier = reach & bridge & ~visited
        visited |= frontier
    # fallback: cheapest bridge cell adjacent to the basin
    pool = bridge & ndimage.binary_dilation(a_mask, structure=_4CONN)
    if not pool.any():
        pool = bridge if bridge.any() else region
    vals = np.where(pool, psi, np.inf)
    return np.unravel_index(np.argmin(vals), psi.shape)


def secular_frequencies(psi: np.ndarray, grid: GridSpec, minimum: MinimumResult,
                        ion: IonSpecies, window_frac: float = 0.05):
    """(omega_x, omega_y) from the Hessian of a least-squares quadratic fit.

    The fit window is window_frac * r0 around the minimum (at least 2.5
    cells so the fit stays overdetermined on coarse grids).
    """
    x0, y0 = minimum.point
    w = max(window_frac * minimum.r0, 2.5 * max(grid.dx, grid.dy))
    xs, ys = grid.x, grid.y
    isel = np.where(np.abs(xs - x0) <= w)[0]
    jsel = np.where(np.abs(ys - y0) <= w)[0]
    if isel.size < 3 or jsel.size < 3:
        raise SaddleNotMinimumError("fit window too small for a quadratic fit")
    X, Y = np.meshgrid(xs[isel], ys[jsel])
    Z = psi[np.ix_(jsel, isel)]
    xi = (X.ravel() - x0) / w
    eta = (Y.ravel() - y0) / w
    A = np.column_stack([np.ones_like(xi), xi, eta, xi * xi, xi * eta, eta * eta])
    coef, *_ = np.linalg.lstsq(A, Z.ravel(), rcond=None)
    hess = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]]) / (w * w)
    evals, evecs = np.linalg.eigh(hess)
    if evals.min() <= 0:
        raise SaddleNotMinimumError(
            f"quadratic fit has a non-positive curvature (eigenvalues {evals})"
        )
    omegas = np.sqrt(evals / ion.mass)
    # assign eigenvalues to the x/y axes by the dominant eigenvector component
    if abs(evecs[0, 0]) >= abs(evecs[1, 0]):
        return float(omegas[0]), float(omegas[1])
    return float(omegas[1]), float(omegas[0])


@dataclass(frozen=True)
class NormalizedQuantities:
    d: float
    f: object          # float or tuple, matching the omega argument
    u: Optional[float] = None
    mode: str = "r0"


def normalize(depth: float, omega, ion: IonSpecies, drive: DriveConfig,
              r_scale: float, mode: str = "r0", h: Optional[float] = None,
              r1_scale: Optional[float] = None) -> NormalizedQuantities:
    """Dimensionless depth d and frequency f at length scale ``r_scale``.

    mode is a label ("r0" or "r1") recording which scale was used.  When the
    plate height h (and r1_scale, defaulting to r_scale) are given, the
    normalized plate bias u is included.
    """
    if r_scale <= 0:
        raise ValidationError("r_scale must be positive")
    V = drive.rf_amplitude
    if V == 0:
        raise NormalizationError("normalization undefined at zero RF amplitude")
    Q, m, Om = ion.charge, ion.mass, drive.omega
    d = depth * 4 * m * Om ** 2 * r_scale ** 2 / (Q * V) ** 2

    def f_of(w):
        return w * np.sqrt(2) * m * r_scale ** 2 * Om / abs(Q * V)

    if np.isscalar(omega):
        f = float(f_of(omega))
    else:
        f = tuple(float(f_of(w)) for w in omega)
    u = None
    if h is not None:
        u = plate_bias_u(drive.top_plate_voltage, ion, drive,
                         r1_scale if r1_scale is not None else r_scale, h)
    return NormalizedQuantities(d=float(d), f=f, u=u, mode=mode)


def plate_bias_u(plate_voltage: float, ion: IonSpecies, drive: DriveConfig,
                 r1_scale: float, h: float) -> float:
    """Normalized top-plate bias u = (4 m r1^2 Omega^2 / (Q V^2)) (r1/h) U."""
    V = drive.rf_amplitude
    if V == 0:
        raise NormalizationError("u undefined at zero RF amplitude")
    if h <= 0 or r1_scale <= 0:
        raise ValidationError("h and r1 must be positive")
    return (4 * ion.mass * r1_scale ** 2 * drive.omega ** 2 / (ion.charge * V ** 2)) \
        * (r1_scale / h) * plate_voltage


def plate_voltage_for_u(u: float, ion: IonSpecies, drive: DriveConfig,
                        r1_scale: float, h: float) -> float:
    """Inverse of ``plate_bias_u``."""
    unit = plate_bias_u(1.0, ion, drive, r1_scale, h)
    return u / unit


def secular_map(fieldv: PotentialField, ion: IonSpecies, drive: DriveConfig,
                roi=None, window_frac: float = 0.05,
                depth_rel_tol: float = 1e-4) -> SecularMap:
    """Full pipeline: psi, minimum, depth, escape direction, frequencies."""
    psi = secular_potential(fieldv, ion, drive.omega)
    minimum = find_minimum(psi, fieldv.grid, roi=roi)
    depth = trap_depth(psi, fieldv.grid, minimum, rel_tol=depth_rel_tol)
    if depth.untrapped:
        omegas = (float("nan"), float("nan"))
    else:
        omegas = secular_frequencies(psi, fieldv.grid, minimum, ion,
                                     window_frac=window_frac)
    return SecularMap(
        psi=psi, grid=fieldv.grid, minimum=minimum.point, r0=minimum.r0,
        depth=depth.depth, escape=depth.escape, omega=omegas,
        saddle=depth.saddle, untrapped=depth.untrapped,
    )


def summary_record(smap: SecularMap, ion: IonSpecies, drive: DriveConfig,
                   r_scale: float, mode: str = "r0", h: Optional[float] = None,
                   r1_scale: Optional[float] = None) -> dict:
    """Flat summary {r0, depth_eV, omega_x, omega_y, d, f, u, escape}."""
    norm = normalize(smap.depth, smap.omega, ion, drive, r_scale, mode=mode,
                     h=h, r1_scale=r1_scale)
    fx, fy = norm.f if isinstance(norm.f, tuple) else (norm.f, norm.f)
    return {
        "r0": smap.r0,
        "depth_eV": smap.depth / EV,
        "omega_x": smap.omega[0],
        "omega_y": smap.omega[1],
        "d": norm.d,
        "f": 0.5 * (fx + fy),
        "u": norm.u if norm.u is not None else 0.0,
        "escape": smap.escape.value,
    }


def export_psi_csv(smap: SecularMap, path, metadata: Optional[Mapping] = None) -> None:
    """CSV of (x, y, psi) with a metadata header line."""
    g = smap.grid
    X, Y = np.meshgrid(g.x, g.y)
    meta = " ".join(f"{k}={v}" for k, v in (metadata or {}).items())
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# secular potential (J) {meta}\n")
        f.write("x,y,psi\n")
        for xv, yv, vv in zip(X.ravel(), Y.ravel(), smap.psi.ravel()):
            f.write(f"{xv:.8e},{yv:.8e},{vv:.8e}\n")
