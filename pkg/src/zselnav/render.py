"""Egocentric raycast rendering and goal-modality derivation.

One ray per image column is marched through the occupancy grid (DDA,
first-hit, no transparency); walls and objects become vertical columns with
height inversely proportional to perpendicular distance. The floor half of
the image is tinted by the room the camera stands in, which is the visual
cue room-label navigation relies on.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .worldgen import (FREE, FloorPlan, ObjectInstance, Pose, PoseError,
                       ROOM_FLOOR_COLORS, _mix, wrap_angle)

MODALITIES = ("image", "label", "sketch", "audio", "edgemap")
AUDIO_DIM = 16
N_CATEGORIES = 6

CEILING_COLOR = (0.93, 0.93, 0.96)
WALL_SHADE_X = 0.62   # columns hit through a vertical grid line
WALL_SHADE_Y = 0.48


@dataclass(frozen=True)
class RenderConfig:
    width: int = 32
    height: int = 32
    fov: float = math.pi / 2.0
    max_range: float = 24.0           # meters
    wall_gain: float = 1.0            # column half-height = H/2 * gain / perp_dist

    def ray_offsets(self) -> np.ndarray:
        i = np.arange(self.width, dtype=np.float64)
        return self.fov / 2.0 - (i + 0.5) * self.fov / self.width


@dataclass
class Observation:
    """Egocentric RGB frame; values in [0, 1], shape (H, W, 3) float32."""

    pixels: np.ndarray
    fov: float

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"bad observation shape {self.pixels.shape}")


@dataclass
class GoalDescriptor:
    """Tagged union over goal modalities.

    payload: image/sketch/edgemap -> (H, W, 3) float32 array; label -> int
    category index; audio -> (AUDIO_DIM,) float32 vector. info carries
    provenance (category name, seeds, source pose) for dataset bookkeeping.
    """

    modality: str
    payload: object
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.modality == "label":
            if not (0 <= int(self.payload) < N_CATEGORIES):
                raise ValueError(f"label index {self.payload} outside vocabulary")
        elif self.modality == "audio":
            if np.asarray(self.payload).shape != (AUDIO_DIM,):
                raise ValueError("audio payload must be a 16-dim vector")
        else:
            arr = np.asarray(self.payload)
            if arr.ndim != 3 or arr.shape[2] != 3:
                raise ValueError(f"{self.modality} payload must be (H, W, 3)")


# -- DDA core -----------------------------------------------------------------

def _raycast_impl(code, cs, px, py, angles, max_t, kind, dist, side, hit_r, hit_c):
    """March every ray to its first solid cell.

    code: 0 free, 1 wall, >=2 object (instance_id + 2). Distances are
    euclidean meters along the ray; side is 0 when the hit face is a
    vertical grid line, 1 when horizontal.
    """
    rows, cols = code.shape
    for i in range(angles.shape[0]):
        a = angles[i]
        dx = math.cos(a)
        dy = math.sin(a)
        cx = px / cs
        cy = py / cs
        mc = int(cx)
        mr = int(cy)
        if dx == 0.0:
            dx = 1e-12
        if dy == 0.0:
            dy = 1e-12
        ddx = abs(1.0 / dx)
        ddy = abs(1.0 / dy)
        if dx < 0.0:
            step_c = -1
            sdx = (cx - mc) * ddx
        else:
            step_c = 1
            sdx = (mc + 1.0 - cx) * ddx
        if dy < 0.0:
            step_r = -1
            sdy = (cy - mr) * ddy
        else:
            step_r = 1
            sdy = (mr + 1.0 - cy) * ddy
        kind[i] = 0
        dist[i] = max_t
        side[i] = 0
        hit_r[i] = -1
        hit_c[i] = -1
        t_cells = 0.0
        max_cells = max_t / cs
        while True:
            if sdx < sdy:
                t_cells = sdx
                sdx += ddx
                mc += step_c
                sd = 0
            else:
                t_cells = sdy
                sdy += ddy
                mr += step_r
                sd = 1
            if t_cells > max_cells:
                break
            if mr < 0 or mr >= rows or mc < 0 or mc >= cols:
                kind[i] = 1
                dist[i] = t_cells * cs
                side[i] = sd
                hit_r[i] = mr
                hit_c[i] = mc
                break
            cc = code[mr, mc]
            if cc != 0:
                kind[i] = 1 if cc == 1 else 2
                dist[i] = t_cells * cs
                side[i] = sd
                hit_r[i] = mr
                hit_c[i] = mc
                break


try:
    from numba import njit as _njit
    _raycast = _njit(cache=True)(_raycast_impl)
except ImportError:  # pragma: no cover
    _raycast = _raycast_impl


def _cell_code(plan: FloorPlan) -> np.ndarray:
    cached = getattr(plan, "_render_code", None)
    if cached is not None:
        return cached
    code = np.where(plan.grid == FREE, 0, 1).astype(np.int32)
    for obj in plan.objects:
        for (r, c) in obj.footprint:
            code[r, c] = obj.instance_id + 2
    code.setflags(write=False)
    plan._render_code = code
    return code


def raycast(plan: FloorPlan, pose: Pose, config: RenderConfig):
    """Per-column hit buffer for a pose: (kind, dist_m, side, hit_r, hit_c)."""
    code = _cell_code(plan)
    angles = wrap_angle(pose.heading) + config.ray_offsets()
    n = angles.shape[0]
    kind = np.zeros(n, dtype=np.int16)
    dist = np.zeros(n, dtype=np.float64)
    side = np.zeros(n, dtype=np.int16)
    hit_r = np.zeros(n, dtype=np.int32)
    hit_c = np.zeros(n, dtype=np.int32)
    _raycast(code, plan.cell_size, pose.x, pose.y, angles, config.max_range,
             kind, dist, side, hit_r, hit_c)
    return kind, dist, side, hit_r, hit_c


def cast_single_ray(plan: FloorPlan, x: float, y: float, heading: float,
                    max_t: float) -> float:
    """Distance in meters to the first blocking cell along one ray (max_t if
    nothing is hit). Shared by the renderer and the motion model."""
    code = _cell_code(plan)
    angles = np.array([wrap_angle(heading)], dtype=np.float64)
    kind = np.zeros(1, dtype=np.int16)
    dist = np.zeros(1, dtype=np.float64)
    side = np.zeros(1, dtype=np.int16)
    hr = np.zeros(1, dtype=np.int32)
    hc = np.zeros(1, dtype=np.int32)
    _raycast(code, plan.cell_size, x, y, angles, max_t, kind, dist, side, hr, hc)
    return float(dist[0]) if kind[0] != 0 else float(max_t)


def _cell_brightness(hit_r: np.ndarray, hit_c: np.ndarray) -> np.ndarray:
    """Deterministic per-cell brightness speckle so wall stretches are
    visually localizable."""
    h = (hit_r.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
         ^ hit_c.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F))
    h ^= h >> np.uint64(29)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(32)
    u = (h & np.uint64(0xFFFF)).astype(np.float64) / 65535.0
    return 0.90 + 0.16 * u


def render_observation(plan: FloorPlan, pose: Pose, config: RenderConfig | None = None) -> Observation:
    """Render the egocentric view at a pose. Pure and deterministic."""
    config = config or RenderConfig()
    plan.require_navigable(pose)
    H, W = config.height, config.width
    kind, dist, side, hit_r, hit_c = raycast(plan, pose, config)
    offsets = config.ray_offsets()
    perp = np.maximum(dist * np.cos(offsets), 1e-6)

    half = (H / 2.0) * config.wall_gain / perp
    colcolor = np.zeros((W, 3), dtype=np.float64)
    shade = np.clip(1.0 / (1.0 + 0.22 * dist), 0.25, 1.0) * _cell_brightness(hit_r, hit_c)
    wall_base = np.where(side[:, None] == 0, WALL_SHADE_X, WALL_SHADE_Y)
    colcolor[:] = wall_base * shade[:, None]

    obj_cols = kind == 2
    if obj_cols.any():
        code = _cell_code(plan)
        hfrac = np.ones(W)
        for i in np.nonzero(obj_cols)[0]:
            obj = plan.object_by_id(int(code[hit_r[i], hit_c[i]]) - 2)
            colcolor[i] = np.array(obj.render_color) * shade[i]
            hfrac[i] = obj.height_frac
        half = np.where(obj_cols, half * hfrac, half)

    half = np.minimum(half, H / 2.0)
    top = H / 2.0 - half
    bot = H / 2.0 + half

    room_id = int(plan.room_map[plan.cell_of(pose)])
    floor = np.array(ROOM_FLOOR_COLORS[plan.room_by_id(room_id).category]) * 0.9

    rows = np.arange(H, dtype=np.float64)[:, None]
    img = np.empty((H, W, 3), dtype=np.float64)
    img[: H // 2] = CEILING_COLOR
    img[H // 2:] = floor
    mask = (rows >= top[None, :]) & (rows < bot[None, :]) & (kind[None, :] != 0)
    img = np.where(mask[:, :, None], colcolor[None, :, :], img)
    return Observation(pixels=np.clip(img, 0.0, 1.0).astype(np.float32), fov=config.fov)


def visible_instances(plan: FloorPlan, pose: Pose, config: RenderConfig | None = None,
                      max_dist: float | None = None) -> dict[int, int]:
    """Ground-truth visibility oracle: instance_id -> number of image
    columns whose first hit is that instance (optionally range-limited)."""
    config = config or RenderConfig()
    kind, dist, _, hit_r, hit_c = raycast(plan, pose, config)
    code = _cell_code(plan)
    counts: dict[int, int] = {}
    for i in range(kind.shape[0]):
        if kind[i] != 2:
            continue
        if max_dist is not None and dist[i] > max_dist:
            continue
        inst = int(code[hit_r[i], hit_c[i]]) - 2
        counts[inst] = counts.get(inst, 0) + 1
    return counts


# -- derived modalities -------------------------------------------------------

def derive_edgemap(obs: Observation, threshold: float = 0.1) -> GoalDescriptor:
    """Binary gradient-magnitude edge map of the luminance image, replicated
    to 3 channels. Central differences with edge-replicated borders."""
    lum = obs.pixels.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    pad = np.pad(lum, 1, mode="edge")
    gx = (pad[1:-1, 2:] - pad[1:-1, :-2]) * 0.5
    gy = (pad[2:, 1:-1] - pad[:-2, 1:-1]) * 0.5
    mag = np.sqrt(gx * gx + gy * gy)
    edges = (mag > threshold).astype(np.float32)
    payload = np.repeat(edges[:, :, None], 3, axis=2)
    return GoalDescriptor(modality="edgemap", payload=payload)


def derive_sketch(plan: FloorPlan, obj: ObjectInstance, variant_seed: int,
                  config: RenderConfig | None = None) -> GoalDescriptor:
    """Shape-only category cue: edge-filtered close-up of the object from a
    seed-determined nearby viewpoint. Deterministic per variant_seed."""
    config = config or RenderConfig()
    if plan.object_map[next(iter(obj.footprint))] != obj.instance_id:
        raise ValueError(f"object {obj.instance_id} not present in plan")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=(plan.seed, obj.instance_id, int(variant_seed), 0x5EC7)))
    ocr, occ = obj.center
    ox = occ * plan.cell_size
    oy = ocr * plan.cell_size
    cands = _cells_near(plan, (ocr, occ), min_m=0.6, max_m=2.2)
    if not cands:
        raise ValueError(f"no free viewpoint near object {obj.instance_id}")
    order = rng.permutation(len(cands))
    for k in order:
        cell = cands[int(k)]
        cx, cy = plan.cell_center(cell)
        heading = math.atan2(oy - cy, ox - cx) + float(rng.uniform(-0.25, 0.25))
        pose = Pose(cx, cy, heading)
        vis = visible_instances(plan, pose, config)
        if vis.get(obj.instance_id, 0) >= 3:
            frame = render_observation(plan, pose, config)
            edge = derive_edgemap(frame)
            return GoalDescriptor(modality="sketch", payload=edge.payload,
                                  info={"category": obj.category,
                                        "variant_seed": int(variant_seed),
                                        "instance_id": obj.instance_id})
    raise ValueError(f"no viewpoint sees object {obj.instance_id} clearly")


def _cells_near(plan: FloorPlan, center_rc, min_m: float, max_m: float):
    r0, c0 = center_rc
    rad = int(max_m / plan.cell_size) + 1
    out = []
    for r in range(max(0, int(r0) - rad), min(plan.rows, int(r0) + rad + 1)):
        for c in range(max(0, int(c0) - rad), min(plan.cols, int(c0) + rad + 1)):
            if not plan.navigable[r, c]:
                continue
            d = math.hypot((r + 0.5 - r0), (c + 0.5 - c0)) * plan.cell_size
            if min_m <= d <= max_m:
                out.append((r, c))
    return out


_AUDIO_SIGNATURES = None


def audio_signatures() -> np.ndarray:
    """Fixed per-category signature vectors (orthonormal by construction, so
    pairwise cosine similarity is ~0)."""
    global _AUDIO_SIGNATURES
    if _AUDIO_SIGNATURES is None:
        rng = np.random.default_rng(0xA0D10)
        m = rng.standard_normal((AUDIO_DIM, AUDIO_DIM))
        q, _ = np.linalg.qr(m)
        _AUDIO_SIGNATURES = np.ascontiguousarray(q[:N_CATEGORIES], dtype=np.float32)
        _AUDIO_SIGNATURES.setflags(write=False)
    return _AUDIO_SIGNATURES


def derive_audio(category: int, dist: float, noise_seed: int,
                 noise_scale: float = 0.02) -> GoalDescriptor:
    """Distance-attenuated category signature: s_c / (1 + dist) plus
    zero-mean noise drawn from noise_seed."""
    if dist < 0:
        raise ValueError("distance must be non-negative")
    sig = audio_signatures()[int(category)].astype(np.float64)
    payload = sig / (1.0 + float(dist))
    if noise_scale > 0.0:
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(int(noise_seed), int(category), 0xAD10)))
        payload = payload + noise_scale * rng.standard_normal(AUDIO_DIM)
    return GoalDescriptor(modality="audio", payload=payload.astype(np.float32),
                          info={"category_index": int(category),
                                "dist": float(dist), "noise_seed": int(noise_seed)})


# -- image export -------------------------------------------------------------

def _to_u8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.round(pixels * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, pixels: np.ndarray) -> None:
    """Binary PPM, 8 bits per channel, row-major."""
    u8 = _to_u8(pixels)
    h, w, _ = u8.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(u8.tobytes())


def write_png(path, pixels: np.ndarray) -> None:
    """Minimal truecolor PNG writer (8-bit per channel, row-major)."""
    u8 = _to_u8(pixels)
    h, w, _ = u8.shape
    raw = b"".join(b"\x00" + u8[r].tobytes() for r in range(h))

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data)))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(b"\x89PNG\r\n\x1a\n")
        fh.write(chunk(b"IHDR", ihdr))
        fh.write(chunk(b"IDAT", zlib.compress(raw, 9)))
        fh.write(chunk(b"IEND", b""))


def write_image(path, pixels: np.ndarray) -> None:
    path = str(path)
    if path.endswith(".png"):
        write_png(path, pixels)
    else:
        write_ppm(path, pixels)
