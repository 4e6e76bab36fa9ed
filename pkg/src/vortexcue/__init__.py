"""Design, aiming and planning tools for air-vortex-ring notification devices."""

__version__ = "0.1.0"
