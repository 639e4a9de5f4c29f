"""2D Laplace boundary-value solver for strip-electrode layouts.

One unit-voltage basis solution is computed per electrically-independent
electrode group (center / rf / outer, plus the top plate when present); RF
and DC fields are linear combinations of these.

Boundary treatment ("gapped-plane" closure): the electrode plane y=0 is
fully Dirichlet, with the potential interpolated linearly across gaps.  The
lid is Dirichlet at the plate potential when a plate is present, otherwise
a grounded far boundary; side walls are grounded, which together with the
wide grounded outer strips emulates the w_o -> infinity ground plane.

Solver: red-black successive over-relaxation with Chebyshev-accelerated
relaxation factor, iteration cap 1e6, default tolerance 1e-8 on the
interior residual of the 5-point Laplacian.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import SolverConvergenceError, ValidationError
from .geometry import PLATE_GROUP, TrapLayout

_CACHE: dict = {}
CACHE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid over ``extent`` = (x_min, x_max, y_min, y_max).

    dx and dy are kept equal to within a few per mil (the stencil weights use
    the exact values, so mild anisotropy costs nothing); both must resolve
    the smallest gap of the layout the grid is built for.
    """

    nx: int
    ny: int
    extent: tuple[float, float, float, float]

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValidationError(f"grid needs at least 3x3 nodes, got {self.nx}x{self.ny}")
        x0, x1, y0, y1 = self.extent
        if not (x1 > x0 and y1 > y0):
            raise ValidationError(f"degenerate grid extent {self.extent}")
        if abs(self.dx - self.dy) > 0.05 * max(self.dx, self.dy):
            raise ValidationError(
                f"grid spacing must be near-uniform, got dx={self.dx:g}, dy={self.dy:g}"
            )

    @property
    def dx(self) -> float:
        return (self.extent[1] - self.extent[0]) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.extent[3] - self.extent[2]) / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.extent[0], self.extent[1], self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.extent[2], self.extent[3], self.ny)

    @classmethod
    def from_layout(cls, layout: TrapLayout, points_per_gap: int = 8,
                    spacing: Optional[float] = None) -> "GridSpec":
        """Grid resolving every gap with at least ``points_per_gap`` cells."""
        gaps = _layout_gaps(layout)
        if spacing is None:
            if not gaps:
                raise ValidationError("layout has no gaps; pass spacing explicitly")
            spacing = min(gaps) / points_per_gap
        x0, x1, y0, y1 = layout.domain
        nx = int(np.ceil((x1 - x0) / spacing)) + 1
        ny = int(np.ceil((y1 - y0) / spacing)) + 1
        grid = cls(nx=nx, ny=ny, extent=(x0, x1, y0, y1))
        if gaps and max(grid.dx, grid.dy) > min(gaps) / points_per_gap * (1 + 1e-9):
            raise ValidationError("grid spacing does not resolve the smallest gap")
        return grid

    def key(self) -> tuple:
        return (self.nx, self.ny, self.extent)


def _layout_gaps(layout: TrapLayout) -> list[float]:
    es = sorted(layout.electrodes, key=lambda e: e.x_min)
    return [b.x_min - a.x_max for a, b in zip(es[:-1], es[1:]) if b.x_min - a.x_max > 0]


@dataclass(frozen=True)
class BasisPotential:
    """Dimensionless potential (per volt applied) of one electrode group."""

    electrode_id: str
    values: np.ndarray   # shape (ny, nx)
    grid: GridSpec


@dataclass(frozen=True)
class PotentialField:
    """phi_rf is the amplitude of the cos(Omega t) part; phi_dc the static part."""

    grid: GridSpec
    phi_rf: np.ndarray
    phi_dc: np.ndarray


# ---------------------------------------------------------------------------
# core SOR solve
# ---------------------------------------------------------------------------

def solve_laplace(bottom, top, left, right, *, tol: float = 1e-8,
                  max_iter: int = 1_000_000, dx: float = 1.0, dy: float = 1.0,
                  check_every: int = 16):
    """Solve Laplace's equation on a rectangle with Dirichlet boundaries.

    Returns (phi, sweeps, residual).  Residual is the max interior defect of
    the 5-point stencil, compared against tol * max|phi|.
    """
    bottom = np.asarray(bottom, float)
    top = np.asarray(top, float)
    left = np.asarray(left, float)
    right = np.asarray(right, float)
    nx = bottom.size
    ny = left.size
    if top.size != nx or right.size != ny:
        raise ValidationError("boundary array sizes disagree")
    if tol <= 0:
        raise ValidationError("tol must be positive")

    phi = np.zeros((ny, nx))
    phi[0, :] = bottom
    phi[-1, :] = top
    phi[:, 0] = left
    phi[:, -1] = right
    # corners are not stencil neighbours of any interior node; leave as set

    cx = 1.0 / (dx * dx)
    cy = 1.0 / (dy * dy)
    k = 1.0 / (2.0 * (cx + cy))
    rho = (cx * np.cos(np.pi / (nx - 1)) + cy * np.cos(np.pi / (ny - 1))) / (cx + cy)

    scale = max(np.abs(phi).max(), 1e-300)
    if np.abs(phi).max() == 0.0:
        return phi, 0, 0.0

    # slices for the red-black checkerboard update
    def color_blocks(color):
        blocks = []
        for j0 in (1, 2):
            i0 = 1 if (j0 + 1) % 2 == color else 2
            if j0 > ny - 2 or i0 > nx - 2:
                continue
            js = slice(j0, ny - 1, 2)
            isl = slice(i0, nx - 1, 2)
            nbrs = (
                (slice(j0 - 1, ny - 2, 2), isl),
                (slice(j0 + 1, ny, 2), isl),
                (js, slice(i0 - 1, nx - 2, 2)),
                (js, slice(i0 + 1, nx, 2)),
            )
            blocks.append(((js, isl), nbrs))
        return blocks

    blocks = [color_blocks(0), color_blocks(1)]

    omega = 1.0
    sweeps = 0
    residual = np.inf
    while sweeps < max_iter:
        for color in (0, 1):
            for (js, isl), ((jn, inx), (js2, is2), (jw, iw), (je, ie)) in blocks[color]:
                gs = k * (cy * (phi[jn, inx] + phi[js2, is2]) + cx * (phi[jw, iw] + phi[je, ie]))
                phi[js, isl] += omega * (gs - phi[js, isl])
            if sweeps == 0 and color == 0:
                omega = 1.0 / (1.0 - 0.5 * rho * rho)
            else:
                omega = 1.0 / (1.0 - 0.25 * rho * rho * omega)
        sweeps += 1
        if sweeps % check_every == 0 or sweeps == max_iter:
            gs = k * (cy * (phi[:-2, 1:-1] + phi[2:, 1:-1]) + cx * (phi[1:-1, :-2] + phi[1:-1, 2:]))
            residual = float(np.abs(gs - phi[1:-1, 1:-1]).max())
            scale = max(float(np.abs(phi).max()), 1e-300)
            if residual <= tol * scale:
                return phi, sweeps, residual
    raise SolverConvergenceError(
        f"SOR did not reach tol={tol:g} within {max_iter} sweeps (residual {residual:g})",
        residual=residual, iterations=sweeps,
    )


# ---------------------------------------------------------------------------
# boundary profiles and basis solves
# ---------------------------------------------------------------------------

def boundary_profile(layout: TrapLayout, group: str, x_nodes: np.ndarray) -> np.ndarray:
    """Bottom-boundary values for ``group`` at 1 V, linear ramps across gaps.

    The plane outside the outermost electrodes interpolates to the grounded
    side walls.
    """
    es = sorted(layout.electrodes, key=lambda e: e.x_min)
    knots: list[tuple[float, float]] = []
    x_lo, x_hi = x_nodes[0], x_nodes[-1]
    if es[0].x_min > x_lo:
        knots.append((x_lo, 0.0))
    for e in es:
        v = 1.0 if e.group == group else 0.0
        knots.append((e.x_min, v))
        knots.append((e.x_max, v))
    if es[-1].x_max < x_hi:
        knots.append((x_hi, 0.0))
    ts = np.array([t for t, _ in knots])
    vs = np.array([v for _, v in knots])
    # nudge coincident knots (touching electrodes) so interp sees a jump
    eps = 1e-9 * max(x_hi - x_lo, 1.0)
    for i in range(1, ts.size):
        if ts[i] <= ts[i - 1]:
            ts[i] = ts[i - 1] + eps
    return np.interp(x_nodes, ts, vs, left=0.0, right=0.0)


def solve_basis(layout: TrapLayout, grid: GridSpec, tol: float = 1e-8, *,
                max_iter: int = 1_000_000, groups: Optional[Sequence[str]] = None,
                use_cache: bool = True) -> list[BasisPotential]:
    """Unit-voltage basis solutions, one per independent electrode group.

    Results are cached on (layout, grid, tol) so sweeps re-solve geometry
    only when it changes.
    """
    wanted = tuple(groups) if groups is not None else layout.groups
    unknown = set(wanted) - set(layout.groups)
    if unknown:
        raise LookupError(f"unknown electrode group(s) {sorted(unknown)}")
    key = (layout.key(), grid.key(), float(tol), wanted)
    if use_cache and key in _CACHE:
        return list(_CACHE[key])

    xn = grid.x
    zeros_x = np.zeros(grid.nx)
    zeros_y = np.zeros(grid.ny)
    out = []
    for gname in wanted:
        if gname == PLATE_GROUP:
            bottom = zeros_x
            top = np.ones(grid.nx)
        else:
            bottom = boundary_profile(layout, gname, xn)
            top = zeros_x
        phi, _, _ = solve_laplace(bottom, top, zeros_y, zeros_y,
                                  tol=tol, max_iter=max_iter, dx=grid.dx, dy=grid.dy)
        if phi.min() < -1e-6 or phi.max() > 1 + 1e-6:
            raise SolverConvergenceError(
                f"basis {gname!r} violates the maximum principle "
                f"(range [{phi.min():g}, {phi.max():g}])"
            )
        out.append(BasisPotential(electrode_id=gname, values=phi, grid=grid))
    if use_cache:
        _CACHE[key] = tuple(out)
    return out


def clear_cache() -> None:
    _CACHE.clear()


def compose(basis: Sequence[BasisPotential], rf_amplitude: float,
            dc_voltages: Optional[Mapping[str, float]] = None,
            top_plate_voltage: float = 0.0) -> PotentialField:
    """Linear combination of basis solutions into RF amplitude and DC fields."""
    if not basis:
        raise ValidationError("empty basis set")
    by_id = {b.electrode_id: b for b in basis}
    grid = basis[0].grid
    shape = basis[0].values.shape

    phi_rf = np.zeros(shape)
    if rf_amplitude != 0.0:
        if "rf" not in by_id:
            raise LookupError("basis set has no 'rf' group")
        phi_rf = rf_amplitude * by_id["rf"].values

    phi_dc = np.zeros(shape)
    for name, volts in (dc_voltages or {}).items():
        if name not in by_id:
            raise LookupError(f"unknown electrode id {name!r}")
        if volts != 0.0:
            phi_dc = phi_dc + volts * by_id[name].values
    if top_plate_voltage != 0.0:
        if PLATE_GROUP not in by_id:
            raise LookupError("layout has no top plate")
        phi_dc = phi_dc + top_plate_voltage * by_id[PLATE_GROUP].values
    return PotentialField(grid=grid, phi_rf=phi_rf, phi_dc=phi_dc)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def gradient(values: np.ndarray, grid: GridSpec, point) -> np.ndarray:
    """Bilinear-interpolated central-difference gradient at ``point`` (x, y).

    Second-order accurate; the point must sit at least one cell inside the
    domain.
    """
    x, y = point
    x0, x1, y0, y1 = grid.extent
    if not (x0 + grid.dx <= x <= x1 - grid.dx and y0 + grid.dy <= y <= y1 - grid.dy):
        raise ValidationError(f"point {point} is outside the interior of the grid")
    fx = (x - x0) / grid.dx
    fy = (y - y0) / grid.dy
    i = min(int(fx), grid.nx - 2)
    j = min(int(fy), grid.ny - 2)
    tx = fx - i
    ty = fy - j
    i = max(i, 1)
    j = max(j, 1)
    i2 = min(i + 1, grid.nx - 2)
    j2 = min(j + 1, grid.ny - 2)

    def cdiff(jj, ii):
        gx = (values[jj, ii + 1] - values[jj, ii - 1]) / (2 * grid.dx)
        gy = (values[jj + 1, ii] - values[jj - 1, ii]) / (2 * grid.dy)
        return gx, gy

    g00 = cdiff(j, i)
    g01 = cdiff(j, i2)
    g10 = cdiff(j2, i)
    g11 = cdiff(j2, i2)
    out = []
    for c in (0, 1):
        out.append((1 - ty) * ((1 - tx) * g00[c] + tx * g01[c])
                   + ty * ((1 - tx) * g10[c] + tx * g11[c]))
    return np.array(out)


class GradientInterpolator:
    """Fast repeated gradient queries on one scalar grid.

    Precomputes np.gradient once and bilinearly interpolates it; used by the
    trajectory integrator.
    """

    def __init__(self, values: np.ndarray, grid: GridSpec):
        gy, gx = np.gradient(values, grid.dy, grid.dx)
        self._gx = gx
        self._gy = gy
        self.grid = grid

    def __call__(self, x, y):
        g = self.grid
        x0, _, y0, _ = g.extent
        fx = (np.asarray(x) - x0) / g.dx
        fy = (np.asarray(y) - y0) / g.dy
        i = np.clip(fx.astype(int), 0, g.nx - 2)
        j = np.clip(fy.astype(int), 0, g.ny - 2)
        tx = fx - i
        ty = fy - j
        out = []
        for arr in (self._gx, self._gy):
            v = ((1 - ty) * ((1 - tx) * arr[j, i] + tx * arr[j, i + 1])
                 + ty * ((1 - tx) * arr[j + 1, i] + tx * arr[j + 1, i + 1]))
            out.append(v)
        return out[0], out[1]


def grid_gradient(values: np.ndarray, grid: GridSpec):
    """(d/dx, d/dy) arrays over the full grid (central interior, one-sided edges)."""
    gy, gx = np.gradient(values, grid.dy, grid.dx)
    return gx, gy


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def layout_grid_hash(layout: TrapLayout, grid: GridSpec) -> str:
    text = repr((layout.key(), grid.key()))
    return hashlib.sha256(text.encode()).hexdigest()


def dump_basis_csv(basis: BasisPotential, path) -> None:
    """CSV dump of (x, y, value) for one basis solution."""
    g = basis.grid
    X, Y = np.meshgrid(g.x, g.y)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# basis={basis.electrode_id} nx={g.nx} ny={g.ny}\n")
        f.write("x,y,value\n")
        for xv, yv, vv in zip(X.ravel(), Y.ravel(), basis.values.ravel()):
            f.write(f"{xv:.8e},{yv:.8e},{vv:.8e}\n")


def save_basis_set(path, layout: TrapLayout, grid: GridSpec,
                   bases: Sequence[BasisPotential], tol: float) -> None:
    """Binary cache file with a {layout hash, grid spec, version} header."""
    arrays = {f"basis_{b.electrode_id}": b.values for b in bases}
    np.savez_compressed(
        path,
        header_hash=np.array(layout_grid_hash(layout, grid)),
        header_version=np.array(CACHE_FORMAT_VERSION),
        header_tol=np.array(tol),
        header_grid=np.array([grid.nx, grid.ny], dtype=np.int64),
        header_extent=np.array(grid.extent),
        header_ids=np.array([b.electrode_id for b in bases]),
        **arrays,
    )


def load_basis_set(path, layout: TrapLayout, grid: GridSpec) -> list[BasisPotential]:
    """Load a basis cache, validating it matches (layout, grid)."""
    with np.load(path, allow_pickle=False) as data:
        if int(data["header_version"]) != CACHE_FORMAT_VERSION:
            raise ValidationError("basis cache version mismatch")
        if str(data["header_hash"]) != layout_grid_hash(layout, grid):
            raise ValidationError("basis cache does not match this layout/grid")
        ids = [str(s) for s in data["header_ids"]]
        return [BasisPotential(electrode_id=i, values=data[f"basis_{i}"], grid=grid)
                for i in ids]
