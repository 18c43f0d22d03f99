"""Bias auditing for image datasets: joint image/attribution clustering
plus counterfactual artifact-insertion testing against a pluggable predictor."""

__version__ = "0.1.0"
