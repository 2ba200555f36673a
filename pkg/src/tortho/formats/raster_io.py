"""Raster images with world-file sidecars."""
from __future__ import annotations

import os

import numpy as np
from PIL import Image

from ..errors import FormatError


def world_file_path(image_path) -> str:
    """``tdom.png`` -> ``tdom.pgw``, ``x.tif`` -> ``x.tfw``."""
    root, ext = os.path.splitext(os.fspath(image_path))
    ext = ext.lstrip(".")
    if len(ext) < 2:
        return root + ".wld"
    return f"{root}.{ext[0]}{ext[-1]}w"


def format_world_file(params) -> str:
    return "".join(f"{float(v):.10g}\n" for v in params)


def write_world_file(params, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_world_file(params))


def read_world_file(path):
    with open(path, encoding="ascii") as fh:
        vals = [line.strip() for line in fh if line.strip()]
    if len(vals) != 6:
        raise FormatError(f"{path}: a world file has 6 lines, found {len(vals)}")
    try:
        return tuple(float(v) for v in vals)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def world_from_pixel(params, col, row):
    """Apply world-file parameters to pixel-centre coordinates."""
    a, d, b, e, c, f = params
    return a * col + b * row + c, d * col + e * row + f


def write_raster(raster, grid, path) -> tuple[str, str]:
    """Write an 8-bit RGB image plus its world file; returns both paths."""
    img = raster.to_uint8() if hasattr(raster, "to_uint8") else np.asarray(raster)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise FormatError("expected an 8-bit RGB raster")
    path = os.fspath(path)
    # explicit PNG options keep the byte stream identical across runs
    kwargs = {"optimize": False, "compress_level": 6} if path.lower().endswith(".png") else {}
    Image.fromarray(img).save(path, **kwargs)
    wf = world_file_path(path)
    write_world_file(grid.world_file(), wf)
    return path, wf


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))
