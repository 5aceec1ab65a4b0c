"""ralab: generator/discriminator families, divergence estimators, and
WGAN experiment harness for distribution-learning diagnostics."""

__version__ = "0.1.0"

from . import (diffgraph, discriminators, divergences, experiments, families,
               generators, laplace, training)

__all__ = ["diffgraph", "discriminators", "divergences", "experiments",
           "families", "generators", "laplace", "training", "__version__"]
