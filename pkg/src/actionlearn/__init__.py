"""Learning numeric PDDL action models from noisy plan traces."""

__version__ = "0.1.0"
