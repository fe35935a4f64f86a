"""The seq2seq-lrp command line launcher"""

import logging

import click
from atlas_commons.app_utils import set_verbose

from seq2seq_lrp.app import corpus, explanation, validation
from seq2seq_lrp.app.utils import Seq2SeqLrpGroup
from seq2seq_lrp.version import VERSION

L = logging.getLogger(__name__)


def _set_verbose(verbose):
    set_verbose(logging.getLogger("seq2seq_lrp"), verbose)


def build_app() -> click.Group:
    """The command group holding the commands of every application."""
    commands = {}
    for group in (corpus.app, explanation.app, validation.app):
        commands.update(group.commands)
    help_str = "Summarize texts with an LSTM encoder-decoder and explain the summaries."
    app = Seq2SeqLrpGroup(
        "seq2seq-lrp",
        commands,
        help=help_str,
        callback=_set_verbose,
        params=[click.Option(["-v", "--verbose"], count=True)],
    )

    return click.version_option(VERSION)(app)


def cli():
    """The main CLI entry point"""
    logging.basicConfig(level=logging.INFO)
    logging.captureWarnings(True)
    build_app()()
