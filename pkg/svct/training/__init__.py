"""Optimizer, augmentation, schedule and the two-stage training drivers."""
