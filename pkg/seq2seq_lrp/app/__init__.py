"""seq2seq_lrp application"""
