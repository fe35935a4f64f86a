"""Saliency maps: aggregation, statistics and heatmaps"""
