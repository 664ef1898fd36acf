"""Shape-space analysis of neural network representation matrices."""

__version__ = "0.1.0"
