"""Kuranishi atlases: validation, taming, reductions, perturbations and signed counts."""
