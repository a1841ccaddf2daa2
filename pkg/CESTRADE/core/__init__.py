"""Core simulation engine for CESTRADE"""
