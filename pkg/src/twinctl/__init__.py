"""Control, simulation and analysis for a pressure-tuned physical fruit twin."""

__version__ = "0.1.0"
