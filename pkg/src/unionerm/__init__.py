"""ERM over finite unions of linear feature classes, with exact population
profiles, localization sets, excess-risk bound constants, and a Monte Carlo
verification engine."""

from . import bounds, erm, experiments, localization, model, population, processes

__all__ = [
    "model",
    "population",
    "erm",
    "processes",
    "bounds",
    "localization",
    "experiments",
]

__version__ = "0.1.0"
