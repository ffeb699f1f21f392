"""Agreement maximization between augmented views, at desk scale."""

__version__ = "0.1.0"
