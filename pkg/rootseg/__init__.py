"""rootseg - super-resolution segmentation of plant-root MRI volumes."""

__version__ = "0.1.0"
