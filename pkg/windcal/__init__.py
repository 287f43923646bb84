"""Wind-speed sensor bias estimation with space-time Gaussian processes."""

__version__ = "0.1.0"
