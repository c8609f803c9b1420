"""Guest harness executing tour-construction candidates behind a stdio
protocol."""

from .harness import GuestSession, compute_distance_matrix, serve

__version__ = "0.1.0"

__all__ = ["GuestSession", "compute_distance_matrix", "serve"]
