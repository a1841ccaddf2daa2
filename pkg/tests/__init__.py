"""
Test suite for CESTRADE.
"""
