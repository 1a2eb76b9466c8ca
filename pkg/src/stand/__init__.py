"""Procedural static-analysis problems for 3D frames and a sparse SPD solver bench."""

__version__ = "0.1.0"

# Bumped whenever generated problems would change for a given seed.
GENERATOR_VERSION = "1"
