"""Counterfactual validation of saliency maps"""
