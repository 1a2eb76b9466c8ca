"""Frame structures from carved and deformed 3D grids of cubes.

Pipeline: a full ``nx x ny x nz`` grid of unit cubes, a random number of
cubes removed from the top of every column, every plane of cubes stretched
to a random thickness, and finally the cube edges turned into members.

Node ids follow lexicographic ``(k, j, i)`` corner order, so nodes on the
ground (``k == 0``) always come first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .rng import substream

MAX_RESAMPLES = 100

# Ranges sampled for every structure.
PLANE_SPACING = (3.0, 6.0)
WIDTH_RANGE = (0.2, 0.4)
HEIGHT_RANGE = (0.4, 0.6)
YOUNG_RANGE = (2.5e10, 4.3e10)
DENSITY_RANGE = (2.0e3, 2.6e3)
POISSON_RATIO = 0.2
SHEAR_CORRECTION = 5.0 / 6.0

AXIS_X, AXIS_Y, AXIS_Z = 0, 1, 2


class GenerationError(RuntimeError):
    """Raised when resampling cannot produce a valid structure."""


class DisconnectedFrameError(GenerationError):
    pass


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int
    seed: int = 0

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"grid dimension {name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)


@dataclass
class CellGrid:
    spec: GridSpec
    occupied: np.ndarray  # bool, shape (nx, ny, nz)
    x_planes: np.ndarray
    y_planes: np.ndarray
    z_planes: np.ndarray

    @property
    def heights(self) -> np.ndarray:
        """Number of occupied cells per column, shape ``(nx, ny)``."""
        return self.occupied.sum(axis=2)

    def planes(self, axis: int) -> np.ndarray:
        return (self.x_planes, self.y_planes, self.z_planes)[axis]


@dataclass(frozen=True)
class BeamParams:
    """Section and material data shared by every member of a structure."""

    width: float
    height: float
    young_modulus: float
    density: float
    poisson_ratio: float = POISSON_RATIO
    shear_correction: float = SHEAR_CORRECTION

    @property
    def shear_modulus(self) -> float:
        return self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))


@dataclass(frozen=True)
class Slab:
    """Horizontal panel on top of one occupied cell.

    ``x_members`` are the two bounding beams running along x (length
    ``lx``), ``y_members`` the two running along y.
    """

    z: float
    lx: float
    ly: float
    x_members: tuple[int, int]
    y_members: tuple[int, int]
    is_roof: bool

    @property
    def short(self) -> float:
        return min(self.lx, self.ly)

    @property
    def long(self) -> float:
        return max(self.lx, self.ly)

    @property
    def short_members(self) -> tuple[int, int]:
        return self.x_members if self.lx <= self.ly else self.y_members

    @property
    def long_members(self) -> tuple[int, int]:
        return self.y_members if self.lx <= self.ly else self.x_members

    @property
    def area(self) -> float:
        return self.lx * self.ly


@dataclass(frozen=True)
class WallPanel:
    """Vertical cell face on the boundary of the occupied region."""

    normal: tuple[int, int, int]  # outward, one of +-x, +-y
    z_bottom: float
    z_top: float
    width: float
    horizontal_members: tuple[int, int]
    vertical_members: tuple[int, int]

    @property
    def height(self) -> float:
        return self.z_top - self.z_bottom

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass
class FrameModel:
    nodes: np.ndarray  # (N, 3) coordinates in m
    members: np.ndarray  # (M, 2) node ids, a < b along the member axis
    member_axis: np.ndarray  # (M,) global axis each member runs along
    supports: np.ndarray  # sorted node ids with z == 0
    slabs: list[Slab]
    walls: list[WallPanel]
    params: BeamParams
    grid: CellGrid | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def lengths(self) -> np.ndarray:
        d = self.nodes[self.members[:, 1]] - self.nodes[self.members[:, 0]]
        return np.linalg.norm(d, axis=1)

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.supports] = False
        return np.flatnonzero(mask)

    @property
    def n_dofs(self) -> int:
        return 6 * (self.n_nodes - len(self.supports))

    def rotation(self, member: int) -> np.ndarray:
        """Direction cosines (rows = local x, y, z) of a member."""
        return LOCAL_AXES[int(self.member_axis[member])]


# Local axes per member direction. Local x runs along the member, local y
# is the section height direction (vertical for beams).
LOCAL_AXES = np.array(
    [
        [[1, 0, 0], [0, 0, 1], [0, -1, 0]],
        [[0, 1, 0], [0, 0, 1], [1, 0, 0]],
        [[0, 0, 1], [1, 0, 0], [0, 1, 0]],
    ],
    dtype=float,
)


def generate_grid(spec: GridSpec) -> CellGrid:
    occupied = np.ones(spec.shape, dtype=bool)
    return CellGrid(
        spec=spec,
        occupied=occupied,
        x_planes=np.arange(spec.nx + 1, dtype=float),
        y_planes=np.arange(spec.ny + 1, dtype=float),
        z_planes=np.arange(spec.nz + 1, dtype=float),
    )


def carve_columns(grid: CellGrid, draws=None, attempt: int = 0) -> CellGrid:
    """Remove a uniform random number of cubes (0..nz) from the top of each column.

    ``draws`` may be given explicitly as an ``(nx, ny)`` array of removal
    counts; otherwise they come from the seeded ``carve`` substream and are
    redrawn if every column ends up empty.
    """
    spec = grid.spec
    if draws is not None:
        removed = np.asarray(draws, dtype=int).reshape(spec.nx, spec.ny)
        if removed.min() < 0 or removed.max() > spec.nz:
            raise ValueError("removal counts must lie in 0..nz")
        return _with_heights(grid, spec.nz - removed)

    for inner in range(MAX_RESAMPLES):
        rng = substream(spec.seed, "carve", attempt, inner)
        removed = rng.integers(0, spec.nz, size=(spec.nx, spec.ny), endpoint=True)
        heights = spec.nz - removed
        if heights.any():
            return _with_heights(grid, heights)
    raise GenerationError(f"every column empty after {MAX_RESAMPLES} carve draws")


def _with_heights(grid: CellGrid, heights: np.ndarray) -> CellGrid:
    k = np.arange(grid.spec.nz)
    occupied = grid.occupied & (k[None, None, :] < heights[:, :, None])
    return CellGrid(grid.spec, occupied, grid.x_planes, grid.y_planes, grid.z_planes)


def deform_planes(grid: CellGrid, gaps=None) -> CellGrid:
    """Resample every plane thickness uniformly in [3, 6] m.

    ``gaps`` optionally fixes the spacings as ``(gx, gy, gz)`` arrays.
    """
    spec = grid.spec
    if gaps is None:
        rng = substream(spec.seed, "deform")
        lo, hi = PLANE_SPACING
        gaps = [rng.uniform(lo, hi, size=n) for n in spec.shape]
    planes = []
    for g, n in zip(gaps, spec.shape):
        g = np.asarray(g, dtype=float)
        if g.shape != (n,) or np.any(g <= 0):
            raise ValueError("plane gaps must be positive with one entry per cell layer")
        planes.append(np.concatenate(([0.0], np.cumsum(g))))
    return CellGrid(spec, grid.occupied, *planes)


def sample_beam_params(seed: int) -> BeamParams:
    rng = substream(seed, "params")
    return BeamParams(
        width=float(rng.uniform(*WIDTH_RANGE)),
        height=float(rng.uniform(*HEIGHT_RANGE)),
        young_modulus=float(rng.uniform(*YOUNG_RANGE)),
        density=float(rng.uniform(*DENSITY_RANGE)),
    )


def _padded(occupied: np.ndarray) -> np.ndarray:
    return np.pad(occupied, 1)


def corner_mask(occupied: np.ndarray) -> np.ndarray:
    """Corners of occupied cells, shape ``(nx+1, ny+1, nz+1)``."""
    p = _padded(occupied)
    nx, ny, nz = occupied.shape
    out = np.zeros((nx + 1, ny + 1, nz + 1), dtype=bool)
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                out |= p[a : a + nx + 1, b : b + ny + 1, c : c + nz + 1]
    return out


def edge_masks(occupied: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Existing x-, y- and z-directed cell edges."""
    p = _padded(occupied)
    nx, ny, nz = occupied.shape
    ex = np.zeros((nx, ny + 1, nz + 1), dtype=bool)
    ey = np.zeros((nx + 1, ny, nz + 1), dtype=bool)
    ez = np.zeros((nx + 1, ny + 1, nz), dtype=bool)
    for a in (0, 1):
        for b in (0, 1):
            ex |= p[1 : nx + 1, a : a + ny + 1, b : b + nz + 1]
            ey |= p[a : a + nx + 1, 1 : ny + 1, b : b + nz + 1]
            ez |= p[a : a + nx + 1, b : b + ny + 1, 1 : nz + 1]
    return ex, ey, ez


def count_free_nodes(occupied: np.ndarray) -> int:
    return int(corner_mask(occupied)[:, :, 1:].sum())


def plan_connected(occupied: np.ndarray) -> bool:
    """True when the occupied columns form one piece in plan.

    Columns touching only diagonally still share a corner node.
    """
    _, n = ndimage.label(occupied[:, :, 0], structure=np.ones((3, 3), dtype=int))
    return n == 1


def _kji_ids(mask: np.ndarray) -> np.ndarray:
    """Number the true entries of ``mask`` in (k, j, i) order; -1 elsewhere."""
    ids = np.full(mask.shape, -1, dtype=np.int64)
    t = mask.transpose(2, 1, 0)
    ids_t = ids.transpose(2, 1, 0)
    ids_t[t] = np.arange(int(t.sum()))
    return ids


def extract_frame(grid: CellGrid, params: BeamParams) -> FrameModel:
    occ = grid.occupied
    if not occ.any():
        raise GenerationError("grid has no occupied cell")
    nx, ny, nz = occ.shape
    xs, ys, zs = grid.x_planes, grid.y_planes, grid.z_planes

    corners = corner_mask(occ)
    node_id = _kji_ids(corners)
    ci, cj, ck = np.nonzero(corners.transpose(2, 1, 0))[::-1]
    nodes = np.column_stack([xs[ci], ys[cj], zs[ck]])

    ex, ey, ez = edge_masks(occ)
    ex_id = _kji_ids(ex)
    ey_id = _kji_ids(ey) + np.where(ey, int(ex.sum()), 0)
    ez_id = _kji_ids(ez) + np.where(ez, int(ex.sum() + ey.sum()), 0)

    members = []
    axes = []
    for axis, mask in ((AXIS_X, ex), (AXIS_Y, ey), (AXIS_Z, ez)):
        k, j, i = np.nonzero(mask.transpose(2, 1, 0))
        step = np.zeros(3, dtype=int)
        step[axis] = 1
        a = node_id[i, j, k]
        b = node_id[i + step[0], j + step[1], k + step[2]]
        members.append(np.column_stack([a, b]))
        axes.append(np.full(len(a), axis))
    members = np.concatenate(members)
    member_axis = np.concatenate(axes)

    supports = np.flatnonzero(nodes[:, 2] == 0.0)

    slabs = []
    for k, j, i in zip(*np.nonzero(occ.transpose(2, 1, 0))):
        above = k + 1 < nz and occ[i, j, k + 1]
        slabs.append(
            Slab(
                z=float(zs[k + 1]),
                lx=float(xs[i + 1] - xs[i]),
                ly=float(ys[j + 1] - ys[j]),
                x_members=(int(ex_id[i, j, k + 1]), int(ex_id[i, j + 1, k + 1])),
                y_members=(int(ey_id[i, j, k + 1]), int(ey_id[i + 1, j, k + 1])),
                is_roof=not above,
            )
        )

    walls = []
    p = _padded(occ)
    # Faces normal to x at plane I, then faces normal to y at plane J.
    left, right = p[0 : nx + 1, 1:-1, 1:-1], p[1 : nx + 2, 1:-1, 1:-1]
    for k, j, big_i in zip(*np.nonzero((left ^ right).transpose(2, 1, 0))):
        sign = 1 if left[big_i, j, k] else -1
        walls.append(
            WallPanel(
                normal=(sign, 0, 0),
                z_bottom=float(zs[k]),
                z_top=float(zs[k + 1]),
                width=float(ys[j + 1] - ys[j]),
                horizontal_members=(int(ey_id[big_i, j, k]), int(ey_id[big_i, j, k + 1])),
                vertical_members=(int(ez_id[big_i, j, k]), int(ez_id[big_i, j + 1, k])),
            )
        )
    front, back = p[1:-1, 0 : ny + 1, 1:-1], p[1:-1, 1 : ny + 2, 1:-1]
    for k, big_j, i in zip(*np.nonzero((front ^ back).transpose(2, 1, 0))):
        sign = 1 if front[i, big_j, k] else -1
        walls.append(
            WallPanel(
                normal=(0, sign, 0),
                z_bottom=float(zs[k]),
                z_top=float(zs[k + 1]),
                width=float(xs[i + 1] - xs[i]),
                horizontal_members=(int(ex_id[i, big_j, k]), int(ex_id[i, big_j, k + 1])),
                vertical_members=(int(ez_id[i, big_j, k]), int(ez_id[i + 1, big_j, k])),
            )
        )

    frame = FrameModel(nodes, members, member_axis, supports, slabs, walls, params, grid)
    if not is_connected(frame):
        raise DisconnectedFrameError("frame graph is disconnected")
    return frame


def is_connected(frame: FrameModel) -> bool:
    n = frame.n_nodes
    m = frame.members
    adj = coo_matrix((np.ones(len(m)), (m[:, 0], m[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


def carve_structure(spec: GridSpec, max_free_nodes: int | None = None) -> CellGrid:
    """Carve and deform a grid, redrawing until it is connected and within size cap."""
    grid = generate_grid(spec)
    for attempt in range(MAX_RESAMPLES):
        carved = carve_columns(grid, attempt=attempt)
        if not plan_connected(carved.occupied):
            continue
        if max_free_nodes is not None and count_free_nodes(carved.occupied) > max_free_nodes:
            continue
        return deform_planes(carved)
    raise DisconnectedFrameError(
        f"no connected structure within size cap after {MAX_RESAMPLES} carve attempts"
    )


def generate_structure(
    spec: GridSpec, params: BeamParams | None = None, max_free_nodes: int | None = None
) -> FrameModel:
    """Full pipeline: grid, carving, deformation, frame extraction."""
    grid = carve_structure(spec, max_free_nodes)
    if params is None:
        params = sample_beam_params(spec.seed)
    return extract_frame(grid, params)


def format_geometry(frame: FrameModel) -> str:
    """Plain-text node table, member table and support list."""
    lines = [f"NODES {frame.n_nodes}", "# id x y z"]
    for i, (x, y, z) in enumerate(frame.nodes):
        lines.append(f"{i} {x:.17g} {y:.17g} {z:.17g}")
    lines += [f"MEMBERS {frame.n_members}", "# id a b axis"]
    for m, ((a, b), axis) in enumerate(zip(frame.members, frame.member_axis)):
        lines.append(f"{m} {a} {b} {'xyz'[axis]}")
    lines.append(f"SUPPORTS {len(frame.supports)}")
    lines.append(" ".join(str(s) for s in frame.supports))
    lines.append(f"SLABS {len(frame.slabs)} ROOF {sum(s.is_roof for s in frame.slabs)}")
    lines.append(f"WALLS {len(frame.walls)}")
    return "\n".join(lines) + "\n"
