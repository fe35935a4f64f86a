"""Synthetic corpora and toy training of the summarizer"""
