"""Weight-sharing laboratory: search space, engines, sharing policies,
training protocols, and rank-stability metrics."""

__version__ = "0.1.0"
