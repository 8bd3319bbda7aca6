"""GUR Mixedness Witness - purity detection from the Robertson-Schroedinger uncertainty functional"""

__version__ = "1.0.0"
