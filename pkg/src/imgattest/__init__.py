"""Attested image editing: Plonkish circuits for image-transformation pipelines."""

__version__ = "0.1.0"
