"""Attenuated photoacoustic operators on a ball: models, kernels, Gram matrices and spectra."""

__version__ = "0.1.0"
