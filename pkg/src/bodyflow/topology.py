"""COCO-17 joint layout and the limb sets used for skeleton maps and PAFs.

Joint order follows the COCO keypoint convention. Head joints (nose, eyes,
ears) are ingested for completeness but never appear in any limb, so a head
detection can be missing without affecting the structural priors.
"""

import numpy as np

JOINT_NAMES = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
]

JOINT_INDEX = {name: i for i, name in enumerate(JOINT_NAMES)}

NUM_JOINTS = 17

# Index of the mirror-partner joint under a horizontal flip.
HFLIP_JOINT_PERM = np.array(
    [JOINT_INDEX[n.replace("left_", "@").replace("right_", "left_").replace("@", "right_")]
     if ("left_" in n or "right_" in n) else i
     for i, n in enumerate(JOINT_NAMES)],
    dtype=np.int64,
)

# Limbs whose width the deformation flow is expected to edit. Order matters:
# it fixes the channel layout of both PAF stacks and skeleton maps.
PAF_LIMBS = [
    (JOINT_INDEX["left_shoulder"], JOINT_INDEX["left_elbow"]),    # 0 left upper arm
    (JOINT_INDEX["right_shoulder"], JOINT_INDEX["right_elbow"]),  # 1 right upper arm
    (JOINT_INDEX["left_elbow"], JOINT_INDEX["left_wrist"]),       # 2 left forearm
    (JOINT_INDEX["right_elbow"], JOINT_INDEX["right_wrist"]),     # 3 right forearm
    (JOINT_INDEX["left_hip"], JOINT_INDEX["left_knee"]),          # 4 left thigh
    (JOINT_INDEX["right_hip"], JOINT_INDEX["right_knee"]),        # 5 right thigh
    (JOINT_INDEX["left_knee"], JOINT_INDEX["left_ankle"]),        # 6 left calf
    (JOINT_INDEX["right_knee"], JOINT_INDEX["right_ankle"]),      # 7 right calf
    (JOINT_INDEX["left_shoulder"], JOINT_INDEX["left_hip"]),      # 8 left torso side
    (JOINT_INDEX["right_shoulder"], JOINT_INDEX["right_hip"]),    # 9 right torso side
]

# Skeleton maps additionally carry the two girdle bones, which demarcate the
# torso but get no PAF channel.
SKELETON_EDGES = PAF_LIMBS + [
    (JOINT_INDEX["left_shoulder"], JOINT_INDEX["right_shoulder"]),  # 10 shoulder girdle
    (JOINT_INDEX["left_hip"], JOINT_INDEX["right_hip"]),            # 11 hip girdle
]

NUM_SKELETONS = len(SKELETON_EDGES)  # 12
NUM_PAF_LIMBS = len(PAF_LIMBS)       # 10

# Channel permutations under a horizontal flip (left limb <-> right limb;
# the girdle bones map to themselves).
HFLIP_PAF_PERM = np.array([1, 0, 3, 2, 5, 4, 7, 6, 9, 8], dtype=np.int64)
HFLIP_SKELETON_PERM = np.array([1, 0, 3, 2, 5, 4, 7, 6, 9, 8, 10, 11], dtype=np.int64)

# PAF channel groups used by the structure heatmaps.
ARM_LIMBS = (0, 1, 2, 3)
LEG_LIMBS = (4, 5, 6, 7)
TORSO_LIMBS = (8, 9)


def _check_topology() -> None:
    assert NUM_SKELETONS == 12 and NUM_PAF_LIMBS == 10
    head = {JOINT_INDEX[n] for n in ("nose", "left_eye", "right_eye", "left_ear", "right_ear")}
    for a, b in SKELETON_EDGES:
        assert a not in head and b not in head


_check_topology()
