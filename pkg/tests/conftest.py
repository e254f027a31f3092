import numpy as np

from zselnav import worldgen as wg


def grid_plan(rows_of_text, cell_size=0.125, objects=(), room_category="kitchen"):
    """Build a FloorPlan from '#'/'.' strings; optional (category, cells) objects."""
    grid = np.array([[wg.WALL if ch == "#" else wg.FREE for ch in row]
                     for row in rows_of_text], dtype=np.uint8)
    objs = []
    for i, (cat, cells) in enumerate(objects):
        objs.append(wg.ObjectInstance(instance_id=i, category=cat,
                                      footprint=frozenset(cells)))
    free = {(r, c) for r in range(grid.shape[0]) for c in range(grid.shape[1])
            if grid[r, c] == wg.FREE}
    room = wg.RoomRegion(id=0, category=room_category, cells=frozenset(free))
    return wg.FloorPlan(grid, cell_size, [room], objs, seed=0, generator_style="A")


def open_box(rows, cols, cell_size=0.125, **kw):
    text = ["#" * cols]
    for _ in range(rows - 2):
        text.append("#" + "." * (cols - 2) + "#")
    text.append("#" * cols)
    return grid_plan(text, cell_size, **kw)
