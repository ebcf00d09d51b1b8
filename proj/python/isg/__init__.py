"""Incremental 3D semantic scene graph estimation from sparse SLAM maps."""

from ._isg import (
    Error,
    aos,
    association_candidates,
    fit_obb,
    fuse_belief,
    init_weights,
    obb_collide,
    rel_pose_descriptor,
    run,
    synth,
    toy_train,
)

__all__ = [
    "Error",
    "aos",
    "association_candidates",
    "fit_obb",
    "fuse_belief",
    "init_weights",
    "obb_collide",
    "rel_pose_descriptor",
    "run",
    "synth",
    "toy_train",
]
