"""version"""
from pkg_resources import get_distribution  # type: ignore

VERSION = get_distribution("seq2seq_lrp").version
