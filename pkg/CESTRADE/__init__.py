"""
CESTRADE - Community energy storage trading simulator
"""

__version__ = "1.0.0"
