"""Sequence-to-sequence summarizer with a recorded forward pass"""
