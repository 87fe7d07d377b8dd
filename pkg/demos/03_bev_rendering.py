"""Render top-down floor and ceiling views and score an alignment with them.

Without ground truth, the system scores a candidate relative pose by
rendering both panoramas to bird's-eye-view grids and correlating the
overlapping texture. The renders here use procedural value noise in place
of camera imagery.

    python3 demos/03_bev_rendering.py
"""

import math
import os

import numpy as np
from PIL import Image

from panoplan.bev import BevConfig, densify, overlap_iou, render_bev
from panoplan.geom import between
from panoplan.synth import HomeConfig, generate_home
from panoplan.textures import value_noise
from panoplan.verify import VerifierConfig, XcorrVerifier
from panoplan.hypotheses import generate_hypotheses

OUT = os.path.join(os.path.dirname(__file__), "output", "03")
os.makedirs(OUT, exist_ok=True)

scene, layout = generate_home(HomeConfig(n_rooms=2, panos_per_room=2, seed=12))
floor_tex = value_noise(scale=0.7, seed=0)
ceil_tex = value_noise(scale=0.9, seed=1)
config = BevConfig(pano_width=1024, pano_height=512)

# Render a single panorama. The sparse render marks exactly the cells a
# sample ray hit; densify interpolates across gaps and reports which cells
# have support nearby.
pano = scene.panoramas[0]
sparse = render_bev(pano, "floor", floor_tex, config)
dense, reliable = densify(sparse, config.reliability_kernel)
print(
    f"pano {pano.id} floor render: {sparse.occupancy.sum()} sampled cells "
    f"-> {reliable.sum()} reliable after densify ({sparse.occupancy.shape} grid)"
)
sparse.to_image().save(os.path.join(OUT, "floor_sparse.png"))
dense.to_image().save(os.path.join(OUT, "floor_dense.png"))

ceiling = render_bev(pano, "ceiling", ceil_tex, config)
ceiling.to_image().save(os.path.join(OUT, "ceiling_sparse.png"))
print(f"ceiling render covers {ceiling.occupancy.sum()} cells")

# Same-room panoramas see the same floor, so their densified footprints
# should coincide once mapped through the true relative pose.
a, b = scene.panoramas[0], scene.panoramas[1]
true_pose = between(a.gt_pose, b.gt_pose)
dense_b, _ = densify(render_bev(b, "floor", floor_tex, config), config.reliability_kernel)
iou = overlap_iou(dense, dense_b, true_pose)
print(f"footprint overlap at the true pose: IoU {iou:.3f}")

# The correlation verifier wraps all of this: it scores a hypothesis by
# the mean normalized cross-correlation over jointly visible cells.
verifier = XcorrVerifier(scene, floor_tex, ceil_tex, VerifierConfig(), config)
hyps = generate_hypotheses(a, b)
print(f"\nscoring {len(hyps)} hypotheses for panos {a.id}<->{b.id}:")
for h in hyps.hypotheses:
    d = verifier(h)
    err = math.hypot(h.i_T_j.x - true_pose.x, h.i_T_j.y - true_pose.y)
    print(f"  score {d.score:.3f} ({'accept' if d.accept else 'reject'})  translation off by {err:.2f} m")

# Side-by-side sheet of the saved images for quick eyeballing.
tiles = [Image.open(os.path.join(OUT, n)) for n in ("floor_sparse.png", "floor_dense.png", "ceiling_sparse.png")]
sheet = Image.new("L", (sum(t.width for t in tiles), max(t.height for t in tiles)), 255)
x = 0
for t in tiles:
    sheet.paste(t, (x, 0))
    x += t.width
sheet.save(os.path.join(OUT, "sheet.png"))
print(f"\nwrote renders to {OUT}")
