"""
Holehom - quantitative homogenization experiments on perforated random media
"""

__version__ = "0.1.0"
