"""Enumerate alignment hypotheses for a panorama pair and verify them.

Two panoramas that see the same door can be placed relative to each other
by snapping the door detections together. Each pair of same-kind
detections yields up to two candidate poses; a verifier keeps the
plausible ones.

    python3 demos/02_alignment_hypotheses.py
"""

import math
from dataclasses import replace

from panoplan.geom import Pose2, between, wrap_angle
from panoplan.hypotheses import axis_align, generate_hypotheses
from panoplan.synth import HomeConfig, generate_home
from panoplan.verify import OracleVerifier

scene, layout = generate_home(HomeConfig(n_rooms=4, panos_per_room=2, seed=3))

# Pick a pair of panoramas in rooms joined by a door.
a_id, b_id = next(
    pair for pair in layout.adjacent_pano_pairs()
    if layout.pano_rooms[pair[0]] != layout.pano_rooms[pair[1]]
)
a, b = scene.pano(a_id), scene.pano(b_id)
true_pose = between(a.gt_pose, b.gt_pose)
print(f"panos {a_id} and {b_id}: {len(a.wdos)} and {len(b.wdos)} detections")
print(f"true relative pose: ({true_pose.x:+.3f}, {true_pose.y:+.3f}, {math.degrees(true_pose.theta):+.1f} deg)")

hyps = generate_hypotheses(a, b)
print(f"\n{len(hyps)} hypotheses survive the width-ratio prune:")
for h in hyps.hypotheses:
    p = h.i_T_j
    err_t = math.hypot(p.x - true_pose.x, p.y - true_pose.y)
    err_r = abs(math.degrees(wrap_angle(p.theta - true_pose.theta)))
    print(
        f"  {h.kind.value:7s} {h.mode.name:8s} wdo {h.wdo_i}<->{h.wdo_j}  "
        f"pose ({p.x:+6.2f}, {p.y:+6.2f}, {math.degrees(p.theta):+7.1f} deg)  "
        f"off by {err_t:.2f} m / {err_r:.1f} deg"
    )

# The oracle verifier compares each candidate against ground truth with
# the same tolerances a learned scorer is trained to mimic.
verifier = OracleVerifier(scene)
accepted = [h for h in hyps.hypotheses if verifier(h).accept]
print(f"\noracle keeps {len(accepted)} of {len(hyps)}")
for h in accepted:
    p = h.i_T_j
    print(f"  kept: ({p.x:+.3f}, {p.y:+.3f}, {math.degrees(p.theta):+.1f} deg)")

# Vanishing angles pin rotation modulo 90 degrees, so small rotation errors
# in a hypothesis can be snapped away before optimization. This scene is
# noiseless, so the snap is a no-op; plant a 5 degree bias to see it work.
h = accepted[0]
biased = replace(h, i_T_j=Pose2(h.i_T_j.x, h.i_T_j.y, h.i_T_j.theta + math.radians(5.0)))
snapped = axis_align(biased, a, b)
print(
    "\naxis alignment on a 5 deg biased pose: rotation error %+.4f -> %+.4f deg"
    % (
        math.degrees(wrap_angle(biased.i_T_j.theta - true_pose.theta)),
        math.degrees(wrap_angle(snapped.i_T_j.theta - true_pose.theta)),
    )
)
