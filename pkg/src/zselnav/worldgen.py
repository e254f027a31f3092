"""Procedural multi-room floorplans with exact grid geodesics.

A floorplan is an occupancy grid (free/wall) overlaid with room regions and
object instances. Distances are measured on the 8-connected grid: straight
steps cost one cell, diagonal steps cost sqrt(2) cells, diagonals never cut
wall corners. All distance math tracks integer (straight, diagonal) step
counts and converts to meters through one canonical formula, so two
independent implementations of the same query agree bit-for-bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

SQRT2 = math.sqrt(2.0)

FREE = 0
WALL = 1

ROOM_CATEGORIES = ("living-room", "kitchen", "bedroom", "office", "bathroom", "dining-room")
OBJECT_CATEGORIES = ("bed", "chair", "couch", "potted-plant", "toilet", "tv")

# Lexicographic neighbor order; shortest_path tie-breaking depends on it.
NEIGHBORS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))

ROOM_FLOOR_COLORS = {
    "living-room": (0.45, 0.33, 0.22),
    "kitchen": (0.75, 0.72, 0.60),
    "bedroom": (0.35, 0.28, 0.45),
    "office": (0.30, 0.42, 0.40),
    "bathroom": (0.55, 0.65, 0.75),
    "dining-room": (0.60, 0.45, 0.25),
}

OBJECT_BASE_COLORS = {
    "bed": (0.82, 0.25, 0.30),
    "chair": (0.95, 0.70, 0.12),
    "couch": (0.16, 0.55, 0.85),
    "potted-plant": (0.18, 0.70, 0.25),
    "toilet": (0.88, 0.88, 0.95),
    "tv": (0.55, 0.20, 0.75),
}

# Footprint (rows, cols) and rendered column height fraction per category.
# Shapes are the category cue that survives edge filtering (sketch goals).
OBJECT_SHAPES = {
    "bed": ((6, 8), 0.35),
    "chair": ((4, 4), 0.55),
    "couch": ((4, 8), 0.45),
    "potted-plant": ((3, 3), 0.90),
    "toilet": ((4, 4), 0.40),
    "tv": ((2, 6), 0.75),
}


class GenerationError(RuntimeError):
    """Floorplan generation failed after bounded retries."""


class PoseError(ValueError):
    """A pose is off-grid or not on a navigable cell."""


class Unreachable(RuntimeError):
    """No path exists between the requested cells."""


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def _mix(*vals: int) -> int:
    h = 0x243F6A8885A308D3
    for v in vals:
        h = _splitmix64(h ^ (v & 0xFFFFFFFFFFFFFFFF))
    return h


def instance_color(category: str, instance_id: int) -> tuple[float, float, float]:
    """Deterministic per-instance color: category base hue + small jitter."""
    base = OBJECT_BASE_COLORS[category]
    h = _mix(OBJECT_CATEGORIES.index(category), instance_id)
    out = []
    for k in range(3):
        u = ((h >> (k * 21)) & 0x1FFFFF) / float(0x1FFFFF)  # [0, 1]
        out.append(min(1.0, max(0.0, base[k] + (u - 0.5) * 0.12)))
    return tuple(out)


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t < 0.0:
        t += 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose:
    """Agent or camera pose: planar position in meters plus heading in radians."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass
class RoomRegion:
    id: int
    category: str
    cells: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.category not in ROOM_CATEGORIES:
            raise ValueError(f"unknown room category {self.category!r}")
        if not self.cells:
            raise ValueError("room region has no cells")


@dataclass
class ObjectInstance:
    instance_id: int
    category: str
    footprint: frozenset[tuple[int, int]]
    render_color: tuple[float, float, float] = None
    height_frac: float = None

    def __post_init__(self):
        if self.category not in OBJECT_CATEGORIES:
            raise ValueError(f"unknown object category {self.category!r}")
        if not self.footprint:
            raise ValueError("object footprint is empty")
        if self.render_color is None:
            self.render_color = instance_color(self.category, self.instance_id)
        if self.height_frac is None:
            self.height_frac = OBJECT_SHAPES[self.category][1]

    @property
    def center(self) -> tuple[float, float]:
        rs = [c[0] for c in self.footprint]
        cs = [c[1] for c in self.footprint]
        return (sum(rs) / len(rs) + 0.5, sum(cs) / len(cs) + 0.5)


@dataclass(frozen=True)
class GeneratorParams:
    rows: int = 128
    cols: int = 128
    cell_size: float = 0.125
    room_range: tuple[int, int] = (5, 8)
    object_range: tuple[int, int] = (10, 16)
    style: str = "A"
    max_retries: int = 24

    def __post_init__(self):
        if self.rows < 8 or self.cols < 8:
            raise ValueError("grid dimensions must be at least 8x8 cells")
        if self.room_range[0] < 1 or self.room_range[0] > self.room_range[1]:
            raise ValueError(f"bad room_range {self.room_range}")
        if self.object_range[0] < 0 or self.object_range[0] > self.object_range[1]:
            raise ValueError(f"bad object_range {self.object_range}")
        if self.cell_size <= 0.0:
            raise ValueError("cell_size must be positive")

    @staticmethod
    def preset(style: str = "A", rows: int = 128, cols: int = 128) -> "GeneratorParams":
        """Two generator styles: B has narrower, more elongated rooms and
        fewer objects, standing in for a second visual domain."""
        if style == "A":
            return GeneratorParams(rows=rows, cols=cols, room_range=(5, 8),
                                   object_range=(10, 16), style="A")
        if style == "B":
            return GeneratorParams(rows=rows, cols=cols, room_range=(4, 7),
                                   object_range=(6, 10), style="B")
        raise ValueError(f"unknown generator style {style!r}")


@dataclass
class DistanceField:
    """Exact geodesic field from a source set.

    straight/diag hold per-cell step counts of an optimal path (-1 where
    unreachable); meters is the canonical float conversion of those counts.
    """

    straight: np.ndarray
    diag: np.ndarray
    meters: np.ndarray

    def pair(self, cell: tuple[int, int]) -> tuple[int, int]:
        return (int(self.straight[cell]), int(self.diag[cell]))


def steps_to_meters(straight: int, diag: int, cell_size: float) -> float:
    """Canonical conversion used by every distance consumer."""
    return (straight + diag * SQRT2) * cell_size


class FloorPlan:
    """Immutable navigable world: occupancy grid + rooms + objects.

    Objects occupy free cells but block both movement and sight; the
    navigable mask excludes them. Instances are immutable after
    construction, so plans are safe for concurrent shared reads.
    """

    def __init__(self, grid: np.ndarray, cell_size: float, rooms: list[RoomRegion],
                 objects: list[ObjectInstance], seed: int, generator_style: str):
        self.grid = np.ascontiguousarray(grid, dtype=np.uint8)
        self.grid.setflags(write=False)
        self.cell_size = float(cell_size)
        self.rooms = list(rooms)
        self.objects = list(objects)
        self.seed = int(seed)
        self.generator_style = generator_style

        rows, cols = self.grid.shape
        self.room_map = np.full((rows, cols), -1, dtype=np.int32)
        for room in self.rooms:
            for (r, c) in room.cells:
                self.room_map[r, c] = room.id
        self.object_map = np.full((rows, cols), -1, dtype=np.int32)
        for obj in self.objects:
            for (r, c) in obj.footprint:
                self.object_map[r, c] = obj.instance_id
        self.navigable = (self.grid == FREE) & (self.object_map < 0)
        self.room_map.setflags(write=False)
        self.object_map.setflags(write=False)
        self.navigable.setflags(write=False)
        self._field_cache: dict = {}

    # -- geometry helpers -------------------------------------------------

    @property
    def rows(self) -> int:
        return self.grid.shape[0]

    @property
    def cols(self) -> int:
        return self.grid.shape[1]

    @property
    def plan_id(self) -> str:
        return f"{self.generator_style}-{self.seed}"

    def cell_of(self, pose) -> tuple[int, int]:
        x, y = (pose.x, pose.y) if isinstance(pose, Pose) else (pose[0], pose[1])
        return (int(y / self.cell_size), int(x / self.cell_size))

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        r, c = cell
        return ((c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size)

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.rows and 0 <= cell[1] < self.cols

    def is_navigable(self, cell: tuple[int, int]) -> bool:
        return self.in_bounds(cell) and bool(self.navigable[cell])

    def require_navigable(self, pose) -> tuple[int, int]:
        cell = self.cell_of(pose)
        if not self.is_navigable(cell):
            raise PoseError(f"pose {pose} maps to non-navigable cell {cell}")
        return cell

    def object_by_id(self, instance_id: int) -> ObjectInstance:
        for obj in self.objects:
            if obj.instance_id == instance_id:
                return obj
        raise KeyError(f"no object with instance_id {instance_id}")

    def room_by_id(self, room_id: int) -> RoomRegion:
        for room in self.rooms:
            if room.id == room_id:
                return room
        raise KeyError(f"no room with id {room_id}")

    # -- distance fields ---------------------------------------------------

    def distance_field(self, sources) -> DistanceField:
        """Geodesic field from a cell or an iterable of source cells (cost 0
        at every source). Fields are cached on the plan."""
        if (isinstance(sources, tuple) and len(sources) == 2
                and isinstance(sources[0], (int, np.integer))):
            key = ((int(sources[0]), int(sources[1])),)
        else:
            key = tuple(sorted((int(r), int(c)) for (r, c) in sources))
        cached = self._field_cache.get(key)
        if cached is not None:
            return cached
        for cell in key:
            if not self.in_bounds(cell):
                raise PoseError(f"source cell {cell} out of bounds")
        fld = _compute_field(self.navigable, key)
        meters = np.where(
            fld[0] >= 0,
            (fld[0] + fld[1] * SQRT2) * self.cell_size,
            np.inf,
        )
        out = DistanceField(fld[0], fld[1], meters)
        if len(self._field_cache) > 4096:
            self._field_cache.clear()
        self._field_cache[key] = out
        return out


# -- exact Dijkstra ---------------------------------------------------------

_STEPS = [(dr, dc, 0 if dr == 0 or dc == 0 else 1) for (dr, dc) in NEIGHBORS_8]

try:
    from numba import njit as _njit

    @_njit(cache=True)
    def _field_kernel(nav, rows, cols, seed_idx, S, D):  # pragma: no cover - jit
        n = rows * cols
        key = np.full(n, np.inf, dtype=np.float64)
        hk = np.empty(4 * n + 16, dtype=np.float64)
        hi = np.empty(4 * n + 16, dtype=np.int64)
        hs = 0
        for k in range(seed_idx.shape[0]):
            i = seed_idx[k]
            S[i] = 0
            D[i] = 0
            key[i] = 0.0
            hk[hs] = 0.0
            hi[hs] = i
            hs += 1
            j = hs - 1
            while j > 0:
                p = (j - 1) // 2
                if hk[j] < hk[p] or (hk[j] == hk[p] and hi[j] < hi[p]):
                    hk[j], hk[p] = hk[p], hk[j]
                    hi[j], hi[p] = hi[p], hi[j]
                    j = p
                else:
                    break
        while hs > 0:
            kcur = hk[0]
            icur = hi[0]
            hs -= 1
            hk[0] = hk[hs]
            hi[0] = hi[hs]
            j = 0
            while True:
                l = 2 * j + 1
                r = l + 1
                m = j
                if l < hs and (hk[l] < hk[m] or (hk[l] == hk[m] and hi[l] < hi[m])):
                    m = l
                if r < hs and (hk[r] < hk[m] or (hk[r] == hk[m] and hi[r] < hi[m])):
                    m = r
                if m == j:
                    break
                hk[j], hk[m] = hk[m], hk[j]
                hi[j], hi[m] = hi[m], hi[j]
                j = m
            if kcur > key[icur]:
                continue
            cr = icur // cols
            cc = icur % cols
            s0 = S[icur]
            d0 = D[icur]
            for t in range(8):
                if t == 0:
                    dr, dc, dg = -1, -1, 1
                elif t == 1:
                    dr, dc, dg = -1, 0, 0
                elif t == 2:
                    dr, dc, dg = -1, 1, 1
                elif t == 3:
                    dr, dc, dg = 0, -1, 0
                elif t == 4:
                    dr, dc, dg = 0, 1, 0
                elif t == 5:
                    dr, dc, dg = 1, -1, 1
                elif t == 6:
                    dr, dc, dg = 1, 0, 0
                else:
                    dr, dc, dg = 1, 1, 1
                nr = cr + dr
                nc = cc + dc
                if nr < 0 or nr >= rows or nc < 0 or nc >= cols:
                    continue
                if not nav[nr, nc]:
                    continue
                if dg == 1 and not (nav[cr, nc] and nav[nr, cc]):
                    continue  # no corner cutting
                ns = s0 + (1 - dg)
                nd = d0 + dg
                nk = ns + nd * SQRT2
                ni = nr * cols + nc
                if nk < key[ni]:
                    key[ni] = nk
                    S[ni] = ns
                    D[ni] = nd
                    hk[hs] = nk
                    hi[hs] = ni
                    hs += 1
                    j = hs - 1
                    while j > 0:
                        p = (j - 1) // 2
                        if hk[j] < hk[p] or (hk[j] == hk[p] and hi[j] < hi[p]):
                            hk[j], hk[p] = hk[p], hk[j]
                            hi[j], hi[p] = hi[p], hi[j]
                            j = p
                        else:
                            break

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


def _field_python(nav: np.ndarray, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Reference Dijkstra. Keys are recomputed from integer step counts at
    every push, so results are independent of relaxation order."""
    rows, cols = nav.shape
    S = np.full((rows, cols), -1, dtype=np.int32)
    D = np.full((rows, cols), -1, dtype=np.int32)
    key = np.full((rows, cols), np.inf, dtype=np.float64)
    heap = []
    for cell in seeds:
        if nav[cell]:
            S[cell] = 0
            D[cell] = 0
            key[cell] = 0.0
            heapq.heappush(heap, (0.0, cell[0] * cols + cell[1]))
    while heap:
        k, idx = heapq.heappop(heap)
        r, c = divmod(idx, cols)
        if k > key[r, c]:
            continue
        s0 = int(S[r, c])
        d0 = int(D[r, c])
        for dr, dc, dg in _STEPS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols) or not nav[nr, nc]:
                continue
            if dg and not (nav[r, nc] and nav[nr, c]):
                continue
            ns, nd = s0 + (1 - dg), d0 + dg
            nk = ns + nd * SQRT2
            if nk < key[nr, nc]:
                key[nr, nc] = nk
                S[nr, nc] = ns
                D[nr, nc] = nd
                heapq.heappush(heap, (nk, nr * cols + nc))
    return S, D


def _compute_field(nav: np.ndarray, seeds) -> tuple[np.ndarray, np.ndarray]:
    seeds = [cell for cell in seeds if nav[cell]]
    if _HAVE_NUMBA:
        rows, cols = nav.shape
        S = np.full(rows * cols, -1, dtype=np.int64)
        D = np.full(rows * cols, -1, dtype=np.int64)
        idx = np.array([r * cols + c for (r, c) in seeds], dtype=np.int64)
        if idx.size:
            _field_kernel(nav, rows, cols, idx, S, D)
        return (S.reshape(rows, cols).astype(np.int32),
                D.reshape(rows, cols).astype(np.int32))
    return _field_python(nav, seeds)


def geodesic_distance(plan: FloorPlan, a, b) -> float:
    """Length in meters of the shortest 8-connected path between the cells
    containing a and b. Returns math.inf when the cells are disconnected."""
    ca = plan.require_navigable(a)
    cb = plan.require_navigable(b)
    if ca == cb:
        return 0.0
    fld = plan.distance_field(cb)
    return float(fld.meters[ca])


def shortest_path(plan: FloorPlan, a, b) -> list[tuple[int, int]]:
    """Cell sequence of the lexicographically smallest optimal path a -> b.

    Greedy descent on the exact goal field: from each cell take the first
    neighbor (in NEIGHBORS_8 order) whose step cost exactly accounts for the
    drop in remaining (straight, diag) counts.
    """
    ca = plan.require_navigable(a)
    cb = plan.require_navigable(b)
    fld = plan.distance_field(cb)
    if fld.straight[ca] < 0:
        raise Unreachable(f"no path from {ca} to {cb}")
    path = [ca]
    cur = ca
    nav = plan.navigable
    while cur != cb:
        s0, d0 = int(fld.straight[cur]), int(fld.diag[cur])
        nxt = None
        for dr, dc, dg in _STEPS:
            cand = (cur[0] + dr, cur[1] + dc)
            if not plan.in_bounds(cand) or not nav[cand]:
                continue
            if dg and not (nav[cur[0], cand[1]] and nav[cand[0], cur[1]]):
                continue
            if fld.straight[cand] < 0:
                continue
            if int(fld.straight[cand]) + (1 - dg) == s0 and int(fld.diag[cand]) + dg == d0:
                nxt = cand
                break
        if nxt is None:  # cannot happen on a correct field
            raise Unreachable(f"field descent stuck at {cur}")
        path.append(nxt)
        cur = nxt
    return path


def path_cost_meters(plan: FloorPlan, path: list[tuple[int, int]]) -> float:
    """Exact cost of a king-move cell path, via the canonical conversion."""
    s = d = 0
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        if abs(r1 - r0) + abs(c1 - c0) == 1:
            s += 1
        elif abs(r1 - r0) == 1 and abs(c1 - c0) == 1:
            d += 1
        else:
            raise ValueError(f"non-adjacent step {(r0, c0)} -> {(r1, c1)}")
    return steps_to_meters(s, d, plan.cell_size)


# -- generation --------------------------------------------------------------


def generate_floorplan(seed: int, params: GeneratorParams | None = None) -> FloorPlan:
    """Generate a floorplan. Pure in (seed, params): identical inputs yield
    bit-identical plans. Raises GenerationError after bounded retries."""
    params = params if params is not None else GeneratorParams.preset("A")
    last_err = None
    for attempt in range(params.max_retries):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), attempt, 0xF100)))
        try:
            plan = _generate_once(rng, int(seed), params)
            validate_plan(plan)
            return plan
        except GenerationError as err:
            last_err = err
    raise GenerationError(
        f"floorplan generation failed for seed={seed} style={params.style} "
        f"after {params.max_retries} attempts: {last_err}")


def _generate_once(rng: np.random.Generator, seed: int, params: GeneratorParams) -> FloorPlan:
    rows, cols = params.rows, params.cols
    grid = np.full((rows, cols), WALL, dtype=np.uint8)

    n_rooms = int(rng.integers(params.room_range[0], params.room_range[1] + 1))
    leaves = _bsp_partition(rng, rows, cols, n_rooms, params.style)
    if len(leaves) < params.room_range[0]:
        raise GenerationError(f"partition produced {len(leaves)} leaves")

    elongate = params.style == "B"
    rects = []
    for (r0, c0, r1, c1) in leaves:
        pad = 2
        min_side = 10
        hmax = r1 - r0 - 2 * pad
        wmax = c1 - c0 - 2 * pad
        if hmax < min_side or wmax < min_side:
            raise GenerationError("leaf too small for a room")
        h = int(rng.integers(min_side, hmax + 1))
        w = int(rng.integers(min_side, wmax + 1))
        if elongate:
            # squash the short axis to bias rooms toward corridors-with-ends
            if h > w:
                w = max(min_side, int(w * 0.7))
            else:
                h = max(min_side, int(h * 0.7))
        rr = r0 + pad + int(rng.integers(0, hmax - h + 1))
        cc = c0 + pad + int(rng.integers(0, wmax - w + 1))
        rects.append((rr, cc, rr + h, cc + w))
        grid[rr:rr + h, cc:cc + w] = FREE

    corridor_w = 5 if params.style == "A" else 3
    centers = [((r0 + r1) // 2, (c0 + c1) // 2) for (r0, c0, r1, c1) in rects]
    connected = {0}
    while len(connected) < len(rects):
        best = None
        for i in sorted(connected):
            for j in range(len(rects)):
                if j in connected:
                    continue
                dist = abs(centers[i][0] - centers[j][0]) + abs(centers[i][1] - centers[j][1])
                if best is None or dist < best[0]:
                    best = (dist, i, j)
        _, i, j = best
        _carve_l_corridor(grid, centers[i], centers[j], corridor_w,
                          horizontal_first=bool(rng.integers(0, 2)))
        connected.add(j)

    grid[0, :] = WALL
    grid[-1, :] = WALL
    grid[:, 0] = WALL
    grid[:, -1] = WALL

    if not _connected(grid == FREE):
        raise GenerationError("free space disconnected after carving")

    rooms = _label_rooms(rng, grid, rects)
    objects = _place_objects(rng, grid, rects, params)

    return FloorPlan(grid, params.cell_size, rooms, objects, seed, params.style)


def _bsp_partition(rng, rows, cols, n_rooms, style):
    min_leaf = 16
    leaves = [(1, 1, rows - 1, cols - 1)]
    while len(leaves) < n_rooms:
        # split the largest splittable leaf
        order = sorted(range(len(leaves)),
                       key=lambda i: -(leaves[i][2] - leaves[i][0]) * (leaves[i][3] - leaves[i][1]))
        split_done = False
        for i in order:
            r0, c0, r1, c1 = leaves[i]
            h, w = r1 - r0, c1 - c0
            if max(h, w) < 2 * min_leaf:
                continue
            vertical = w >= h
            span = w if vertical else h
            lo = min_leaf
            hi = span - min_leaf
            cut = int(rng.integers(lo, hi + 1))
            if vertical:
                a, b = (r0, c0, r1, c0 + cut), (r0, c0 + cut, r1, c1)
            else:
                a, b = (r0, c0, r0 + cut, c1), (r0 + cut, c0, r1, c1)
            leaves[i: i + 1] = [a, b]
            split_done = True
            break
        if not split_done:
            break
    return leaves


def _carve_l_corridor(grid, a, b, width, horizontal_first):
    half = width // 2
    rows, cols = grid.shape

    def hseg(r, c0, c1):
        lo, hi = min(c0, c1), max(c0, c1)
        grid[max(1, r - half):min(rows - 1, r + half + 1),
             max(1, lo - half):min(cols - 1, hi + half + 1)] = FREE

    def vseg(c, r0, r1):
        lo, hi = min(r0, r1), max(r0, r1)
        grid[max(1, lo - half):min(rows - 1, hi + half + 1),
             max(1, c - half):min(cols - 1, c + half + 1)] = FREE

    (ra, ca), (rb, cb) = a, b
    if horizontal_first:
        hseg(ra, ca, cb)
        vseg(cb, ra, rb)
    else:
        vseg(ca, ra, rb)
        hseg(rb, ca, cb)


def _connected(mask: np.ndarray) -> bool:
    total = int(mask.sum())
    if total == 0:
        return False
    start = tuple(np.argwhere(mask)[0])
    seen = np.zeros_like(mask)
    seen[start] = True
    stack = [start]
    count = 1
    rows, cols = mask.shape
    while stack:
        r, c = stack.pop()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < rows and 0 <= nc < cols and mask[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                count += 1
                stack.append((nr, nc))
    return count == total


def _label_rooms(rng, grid, rects) -> list[RoomRegion]:
    """Assign every free cell to exactly one room: room rectangles seed a
    multi-source BFS that absorbs corridor cells into the nearest room."""
    rows, cols = grid.shape
    label = np.full((rows, cols), -1, dtype=np.int32)
    from collections import deque
    queue = deque()
    for rid, (r0, c0, r1, c1) in enumerate(rects):
        for r in range(r0, r1):
            for c in range(c0, c1):
                if grid[r, c] == FREE and label[r, c] < 0:
                    label[r, c] = rid
                    queue.append((r, c))
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < rows and 0 <= nc < cols and grid[nr, nc] == FREE and label[nr, nc] < 0:
                label[nr, nc] = label[r, c]
                queue.append((nr, nc))

    cats = list(ROOM_CATEGORIES)
    rng.shuffle(cats)
    rooms = []
    for rid in range(len(rects)):
        cells = frozenset((int(r), int(c)) for r, c in np.argwhere(label == rid))
        if not cells:
            raise GenerationError(f"room {rid} ended up empty")
        rooms.append(RoomRegion(id=rid, category=cats[rid % len(cats)], cells=cells))
    return rooms


def _place_objects(rng, grid, rects, params) -> list[ObjectInstance]:
    rows, cols = grid.shape
    occupied = np.zeros((rows, cols), dtype=bool)
    n_objects = int(rng.integers(params.object_range[0], params.object_range[1] + 1))
    cats = []
    while len(cats) < n_objects:
        block = list(OBJECT_CATEGORIES)
        rng.shuffle(block)
        cats.extend(block)
    cats = cats[:n_objects]

    objects = []
    nav_total = int((grid == FREE).sum())
    for inst_id, cat in enumerate(cats):
        (fh, fw), _ = OBJECT_SHAPES[cat]
        placed = False
        for _ in range(60):
            rect = rects[int(rng.integers(0, len(rects)))]
            r0, c0, r1, c1 = rect
            if bool(rng.integers(0, 2)):
                h, w = fh, fw
            else:
                h, w = fw, fh
            if r1 - r0 - 2 <= h or c1 - c0 - 2 <= w:
                continue
            rr = int(rng.integers(r0 + 1, r1 - 1 - h))
            cc = int(rng.integers(c0 + 1, c1 - 1 - w))
            region = np.s_[rr:rr + h, cc:cc + w]
            if (grid[region] != FREE).any() or occupied[region].any():
                continue
            occupied[region] = True
            nav = (grid == FREE) & ~occupied
            # object must not disconnect navigable space
            if int(nav.sum()) != nav_total - int(occupied.sum()) or not _connected(nav):
                occupied[region] = False
                continue
            cells = frozenset((r, c) for r in range(rr, rr + h) for c in range(cc, cc + w))
            objects.append(ObjectInstance(instance_id=inst_id, category=cat, footprint=cells))
            placed = True
            break
        if not placed:
            continue
    if len(objects) < params.object_range[0]:
        raise GenerationError(f"placed only {len(objects)} objects")
    # renumber so instance ids are dense
    for k, obj in enumerate(objects):
        objects[k] = ObjectInstance(instance_id=k, category=obj.category, footprint=obj.footprint)
    return objects


def validate_plan(plan: FloorPlan) -> None:
    """Check every structural invariant; raises GenerationError on failure."""
    if plan.rows < 8 or plan.cols < 8:
        raise GenerationError("grid smaller than 8x8")
    free = plan.grid == FREE
    if not _connected(free):
        raise GenerationError("free cells are not a single connected component")
    if not _connected(plan.navigable):
        raise GenerationError("navigable cells are not a single connected component")
    covered = np.zeros_like(free)
    for room in plan.rooms:
        for cell in room.cells:
            if not free[cell]:
                raise GenerationError(f"room {room.id} claims non-free cell {cell}")
            if covered[cell]:
                raise GenerationError(f"cell {cell} belongs to two rooms")
            covered[cell] = True
        if not _connected_subset(room.cells):
            raise GenerationError(f"room {room.id} region is not 4-connected")
    if not (covered == free).all():
        raise GenerationError("some free cells belong to no room")
    for obj in plan.objects:
        for cell in obj.footprint:
            if not free[cell]:
                raise GenerationError(f"object {obj.instance_id} on non-free cell {cell}")


def _connected_subset(cells: frozenset) -> bool:
    if not cells:
        return False
    cells = set(cells)
    start = next(iter(sorted(cells)))
    seen = {start}
    stack = [start]
    while stack:
        r, c = stack.pop()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            n = (r + dr, c + dc)
            if n in cells and n not in seen:
                seen.add(n)
                stack.append(n)
    return len(seen) == len(cells)


# -- serialization ------------------------------------------------------------


def plan_to_text(plan: FloorPlan) -> str:
    lines = ["ZSELPLAN v1"]
    lines.append(f"seed={plan.seed} style={plan.generator_style} "
                 f"cell_size={plan.cell_size!r} rows={plan.rows} cols={plan.cols}")
    for r in range(plan.rows):
        lines.append("".join("#" if plan.grid[r, c] == WALL else "." for c in range(plan.cols)))
    for room in plan.rooms:
        cells = ";".join(f"{r},{c}" for (r, c) in sorted(room.cells))
        lines.append(f"room id={room.id} category={room.category} cells={cells}")
    for obj in plan.objects:
        cells = ";".join(f"{r},{c}" for (r, c) in sorted(obj.footprint))
        color = ",".join(repr(v) for v in obj.render_color)
        lines.append(f"object id={obj.instance_id} category={obj.category} "
                     f"height={obj.height_frac!r} color={color} cells={cells}")
    return "\n".join(lines) + "\n"


def plan_from_text(text: str) -> FloorPlan:
    lines = text.splitlines()
    if not lines or lines[0] != "ZSELPLAN v1":
        raise ValueError("not a ZSELPLAN v1 file")
    head = dict(kv.split("=", 1) for kv in lines[1].split())
    rows, cols = int(head["rows"]), int(head["cols"])
    grid = np.full((rows, cols), WALL, dtype=np.uint8)
    for r in range(rows):
        row = lines[2 + r]
        if len(row) != cols:
            raise ValueError(f"grid row {r} has length {len(row)}, expected {cols}")
        for c, ch in enumerate(row):
            grid[r, c] = WALL if ch == "#" else FREE
    rooms, objects = [], []
    for line in lines[2 + rows:]:
        if not line.strip():
            continue
        kind, rest = line.split(" ", 1)
        fields = dict(kv.split("=", 1) for kv in rest.split())
        cells = frozenset(tuple(int(v) for v in item.split(","))
                          for item in fields["cells"].split(";"))
        if kind == "room":
            rooms.append(RoomRegion(id=int(fields["id"]), category=fields["category"], cells=cells))
        elif kind == "object":
            color = tuple(float(v) for v in fields["color"].split(","))
            objects.append(ObjectInstance(
                instance_id=int(fields["id"]), category=fields["category"],
                footprint=cells, render_color=color, height_frac=float(fields["height"])))
        else:
            raise ValueError(f"unknown record kind {kind!r}")
    return FloorPlan(grid, float(head["cell_size"]), rooms, objects,
                     int(head["seed"]), head["style"])


def save_plan(plan: FloorPlan, path) -> None:
    with open(path, "w") as fh:
        fh.write(plan_to_text(plan))


def load_plan(path) -> FloorPlan:
    with open(path) as fh:
        return plan_from_text(fh.read())
