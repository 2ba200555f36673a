"""True orthophoto rendering by orthographic splatting of Gaussian fields."""

__version__ = "0.1.0"
