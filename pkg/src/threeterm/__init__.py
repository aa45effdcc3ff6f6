"""Rate-distortion regions for three-terminal interactive lossy source coding."""

__version__ = "0.1.0"
