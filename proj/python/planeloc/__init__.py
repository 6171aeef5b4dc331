"""Plane-based global localization of a depth camera in a topological map."""

from ._planeloc import (
    CameraIntrinsics,
    InvalidArgument,
    IoError,
    Map,
    NoiseModel,
    NotFound,
    ParseError,
    Pose,
    VersionError,
    build_map,
    detect_features,
    evaluate,
    localize,
    read_depth,
    read_intrinsics,
    write_intrinsics,
    rotation_from_vector,
    segment,
    synth,
    vector_from_rotation,
    write_depth,
)

__all__ = [
    "CameraIntrinsics",
    "InvalidArgument",
    "IoError",
    "Map",
    "NoiseModel",
    "NotFound",
    "ParseError",
    "Pose",
    "VersionError",
    "build_map",
    "detect_features",
    "evaluate",
    "localize",
    "read_depth",
    "read_intrinsics",
    "write_intrinsics",
    "rotation_from_vector",
    "segment",
    "synth",
    "vector_from_rotation",
    "write_depth",
]
