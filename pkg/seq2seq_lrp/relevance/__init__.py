"""Layer-Wise Relevance Propagation through the summarizer"""
