"""Common shared configuration, errors and utilities for the RNNG toolkit."""
__version__ = "0.1.0"
