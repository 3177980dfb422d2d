"""Phrase-structure trees, oracles, bracket scoring and dependency conversion."""
