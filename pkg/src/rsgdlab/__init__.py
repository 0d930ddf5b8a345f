"""Training laboratory for reinforced SGD and classical optimizer baselines."""

__version__ = "0.1.0"
