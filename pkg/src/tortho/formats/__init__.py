"""On-disk formats: Gaussian-field PLY, SfM text models, rasters, config."""
from .config import RunConfig, read_config
from .ply import read_field, write_field
from .raster_io import read_world_file, write_raster
from .sfm import SparseModel, read_sfm

__all__ = [
    "RunConfig",
    "SparseModel",
    "read_config",
    "read_field",
    "read_sfm",
    "read_world_file",
    "write_field",
    "write_raster",
]
