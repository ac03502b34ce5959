"""Volume-fraction microstructures of cubic-to-tetragonal martensite."""

__version__ = "0.1.0"
