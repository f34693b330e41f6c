"""Connected components of moduli of elliptic K3 surfaces of a fixed type."""

__version__ = "0.1.0"
