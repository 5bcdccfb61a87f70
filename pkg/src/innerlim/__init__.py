"""Inner regions of sampled domains, Gromov-Hausdorff bounds and glued limit spaces."""

__version__ = "0.1.0"
