"""Photophysics simulator and spectral-analysis toolkit for SiV- centres in diamond."""
__version__ = "0.1.0"
