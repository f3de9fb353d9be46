"""Design and verification toolkit for a diplexed Josephson traveling-wave parametric amplifier."""

__version__ = "0.1.0"
