"""Generate a synthetic home and poke at what a scene file contains.

Run from the repository root:

    python3 demos/01_generate_scene.py
"""

import os

import numpy as np

from panoplan.floorplan import raster_to_image, rasterize_rooms
from panoplan.scene import NoiseSpec, perturb, save_scene
from panoplan.synth import HomeConfig, generate_home

OUT = os.path.join(os.path.dirname(__file__), "output", "01")
os.makedirs(OUT, exist_ok=True)

# A home is a row (or two rows) of rectangular rooms connected by doors,
# with one to three panoramas per room. Everything downstream consumes the
# per-panorama observations; the layout is kept as ground truth.
config = HomeConfig(n_rooms=6, panos_per_room=2, seed=42, non_manhattan_prob=0.3)
scene, layout = generate_home(config)

print(f"home with {len(layout.room_polygons)} rooms, {len(scene)} panoramas")
print(f"room adjacency through doors: {layout.portals}")

for pano in scene.panoramas[:4]:
    kinds = ", ".join(w.kind.value for w in pano.wdos)
    print(
        f"  pano {pano.id}: {len(pano.contour.vertices)} contour vertices, "
        f"camera at ({pano.gt_pose.x:+.2f}, {pano.gt_pose.y:+.2f}), "
        f"sees [{kinds}]"
    )
print("  ...")

# Each panorama records its room boundary in its own camera frame; mapping
# it through the ground-truth pose must land on the room polygon.
pano = scene.panoramas[0]
world = pano.gt_pose.apply(pano.contour.vertices)
room = layout.room_polygons[layout.pano_rooms[0]]
print(
    "pano 0 contour spans x [%.2f, %.2f] in world, its room spans [%.2f, %.2f]"
    % (world[:, 0].min(), world[:, 0].max(), room[:, 0].min(), room[:, 0].max())
)

scene_path = os.path.join(OUT, "scene.json")
save_scene(scene, scene_path)
print(f"wrote {scene_path}")

# The ground-truth floorplan as a labeled raster, for reference.
raster = rasterize_rooms(layout.room_polygons, cell_size=0.05)
raster_to_image(raster).save(os.path.join(OUT, "gt_floorplan.png"))
print(f"ground-truth raster: {raster.occupancy.shape} cells, {raster.occupied_area:.1f} m^2")

# Detector noise is modeled explicitly: vertex jitter, endpoint jitter,
# vanishing-angle error, and dropped detections.
noisy = perturb(scene, NoiseSpec(sigma_vertex=0.02, sigma_wdo_endpoint=0.01, p_drop_wdo=0.1, seed=7))
n_before = sum(len(p.wdos) for p in scene.panoramas)
n_after = sum(len(p.wdos) for p in noisy.panoramas)
drift = max(
    float(np.abs(n.contour.vertices - c.contour.vertices).max())
    for n, c in zip(noisy.panoramas, scene.panoramas)
)
print(f"perturbed copy: {n_before} -> {n_after} detections, max vertex drift {drift:.3f} m")
