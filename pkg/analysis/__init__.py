"""Interpretability analyses over attention records and composed phrase vectors."""
