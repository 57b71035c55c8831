"""Maximum-principle-satisfying direct DG solver on triangular meshes."""

__version__ = "0.1.0"
