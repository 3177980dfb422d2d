"""Recurrent neural network grammar: model, composition functions, training and inference."""
