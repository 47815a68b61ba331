"""Novelty scoring for time-ordered streams of design images.

Each image is compared against a Gaussian-mixture model of its
predecessors (Fisher-vector and MRF-distance novelty, per-image AIC),
against the tag vocabulary seen so far (tag surprise), and annotated with
the author's point-in-time position in the follow graph.
"""

__version__ = "0.1.0"
