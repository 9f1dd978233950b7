"""Two-level additive Schwarz solver laboratory for high-contrast elliptic
problems, with multiscale and harmonically enriched coarse spaces."""

__version__ = "0.1.0"
