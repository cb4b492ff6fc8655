"""
Database package for the dual-decoding toolkit.

This package includes modules for the optional run store: connectivity,
models, and repository operations.
"""
