"""
Core App - Package Initialization

Centralized utilities for security and validation.
"""
