"""Transactional operability kernel for spatial scene edits."""

__version__ = "0.1.0"
