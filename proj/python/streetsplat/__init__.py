"""Online dense mapping of street scenes with hybrid Gaussians."""

from ._streetsplat import (
    DegenerateCloud,
    DimensionMismatch,
    EmptyVolume,
    Error,
    FormatError,
    MissingFrame,
    SceneConfig,
    evaluate,
    fit_plane,
    map_dataset,
    mesh,
    psnr,
    render_frame,
    scene_counts,
    ssim,
    synth,
)

__all__ = [
    "DegenerateCloud",
    "DimensionMismatch",
    "EmptyVolume",
    "Error",
    "FormatError",
    "MissingFrame",
    "SceneConfig",
    "evaluate",
    "fit_plane",
    "map_dataset",
    "mesh",
    "psnr",
    "render_frame",
    "scene_counts",
    "ssim",
    "synth",
]
