"""Numerical laboratory for ReLU-network classification: synthetic Tsybakov-noise
laws with exact Bayes oracles, sieve ERM, explicit interpolating networks,
Haar rate-distortion tools and excess-risk rate experiments."""

__version__ = "0.1.0"
