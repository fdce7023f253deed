"""Group detected scene-text characters into words with graph networks."""

__version__ = "0.1.0"
