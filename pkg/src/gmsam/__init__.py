"""Group-Mix SAM at desk scale: GMA student encoders distilled from a ViT teacher."""

__version__ = "0.1.0"
