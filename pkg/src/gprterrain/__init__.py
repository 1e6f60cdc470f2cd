"""Synthetic GPR radargrams, terrain classifiers and Bayesian terrain mapping."""

__version__ = "0.1.0"
