"""Spectral series estimators for density ratios and likelihoods"""

__version__ = '1.0.0'
