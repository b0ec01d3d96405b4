"""Fourier-transform option pricing with smooth offsets, FFT ladders and surrogate models."""

__version__ = "0.1.0"
