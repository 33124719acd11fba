"""Scalable variational Bayes for censored streams of symbol pairs."""

__version__ = "0.1.0"
