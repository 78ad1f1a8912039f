"""Autoencoder-based anomaly detection for plankton images."""

__version__ = "0.1.0"
