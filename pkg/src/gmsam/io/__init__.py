"""Checkpoints, manifests, synthetic data and PGM/PPM image files."""
from gmsam.io.checkpoint import load_checkpoint, save_checkpoint
from gmsam.io.images import export_feature_pgm, export_mask_pgm, read_pgm, read_ppm, write_pgm, write_ppm
from gmsam.io.manifest import Dataset, DatasetManifest, decode_item
from gmsam.io.synthetic import ShapeInfo, generate_synthetic, synthetic_image

__all__ = [
    "Dataset", "DatasetManifest", "ShapeInfo", "decode_item", "export_feature_pgm", "export_mask_pgm",
    "generate_synthetic", "load_checkpoint", "read_pgm", "read_ppm", "save_checkpoint",
    "synthetic_image", "write_pgm", "write_ppm",
]
