"""Toolkit for parsing scrambling-heavy language data: CoNLL-U handling,
pseudo-projective transforms, word-order augmentation with n-gram LM
filtering, and a neural arc-eager transition parser."""

__version__ = "0.1.0"
