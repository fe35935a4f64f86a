"""Heatmap renderings of the saliency maps of one text.

Two emitters are provided: a static HTML page and a terminal rendering with ANSI colors. Both
show one row per explained output token and one cell per input token of the original text
(padding positions are not shown).

Every row is normalized by its own maximum absolute relevance: a cell has opacity |R| / max |R|,
red for positive relevance, blue for negative relevance.
"""
from __future__ import annotations

import html
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np
from atlas_commons.typing import FloatArray

from seq2seq_lrp.model.vocab import Vocab
from seq2seq_lrp.saliency.stack import SaliencyStack
from seq2seq_lrp.utils import PathLike

L = logging.getLogger(__name__)

POSITIVE_RGB = (255, 0, 0)
NEGATIVE_RGB = (0, 0, 255)

HTML_HEADER = """<!DOCTYPE html>
<!--
Saliency heatmap: one row per generated token, one cell per input token.
Cell opacity is |R| / max |R| over the row; red cells carry positive relevance,
blue cells negative relevance.
-->
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ font-family: monospace; margin: 20px; }}
table {{ border-collapse: collapse; }}
td {{ padding: 2px 4px; border: 1px solid #eee; white-space: nowrap; }}
td.output {{ font-weight: bold; border-right: 2px solid #999; }}
p.note {{ color: #a00; }}
</style>
</head>
<body>
<h1>{title}</h1>
"""
HTML_FOOTER = "</body>\n</html>\n"


def normalized_rows(stack: SaliencyStack) -> FloatArray:
    """
    Relevance of the displayed positions, each row divided by its maximum absolute value.

    All-zero rows stay zero.
    """
    maps = stack.as_array()[:, : stack.effective_length]
    scale = np.abs(maps).max(axis=1, initial=0.0, keepdims=True)
    scale[scale == 0.0] = 1.0

    return maps / scale


def _cell_color(value: float) -> Tuple[Tuple[int, int, int], float]:
    rgb = POSITIVE_RGB if value >= 0.0 else NEGATIVE_RGB
    return rgb, round(abs(float(value)), 3)


def render_html(
    stack: SaliencyStack, vocab: Vocab, title: str = "Saliency", note: Optional[str] = None
) -> str:
    """
    Render `stack` as a standalone HTML page.

    Args:
        stack: the saliency maps of one text.
        vocab: vocabulary used to display the tokens.
        title: page title.
        note: (Optional) remark displayed above the table, e.g., a truncation notice.

    Returns:
        the HTML document.
    """
    rows = normalized_rows(stack)
    input_tokens = vocab.decode(stack.input_ids[: stack.effective_length])
    parts: List[str] = [HTML_HEADER.format(title=html.escape(title))]
    if note:
        parts.append(f'<p class="note">{html.escape(note)}</p>\n')
    parts.append("<table>\n")
    for map_, row in zip(stack.maps, rows):
        output_token = html.escape(vocab.token_of(map_.emitted_id))
        cells = [f'<td class="output">{map_.output_step}: {output_token}</td>']
        for token, value, relevance in zip(input_tokens, row, map_.relevance):
            (red, green, blue), alpha = _cell_color(value)
            cells.append(
                f'<td style="background-color: rgba({red}, {green}, {blue}, {alpha})" '
                f'title="{relevance:.6g}">{html.escape(token)}</td>'
            )
        parts.append("<tr>" + "".join(cells) + "</tr>\n")
    parts.append("</table>\n")
    parts.append(HTML_FOOTER)

    return "".join(parts)


def _blend(value: float) -> Tuple[int, int, int]:
    """Background color blending white into red or blue with weight |value|."""
    rgb, alpha = _cell_color(value)
    return tuple(int(round(255 + alpha * (channel - 255))) for channel in rgb)  # type: ignore


def render_ansi(stack: SaliencyStack, vocab: Vocab) -> str:
    """Render `stack` for a terminal, one line per generated token."""
    rows = normalized_rows(stack)
    input_tokens = vocab.decode(stack.input_ids[: stack.effective_length])
    lines = []
    for map_, row in zip(stack.maps, rows):
        cells = [
            click.style(token, fg="black", bg=_blend(value))
            for token, value in zip(input_tokens, row)
        ]
        lines.append(f"{vocab.token_of(map_.emitted_id)} | " + " ".join(cells))

    return "\n".join(lines) + "\n"


def write_heatmaps(
    out_dir: PathLike,
    text_id: str,
    stack: SaliencyStack,
    vocab: Vocab,
    note: Optional[str] = None,
) -> Tuple[Path, Path]:
    """
    Write `<text_id>.html` and `<text_id>.ansi` into `out_dir`.

    Returns:
        the paths of the two files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    html_path = out_dir / f"{text_id}.html"
    ansi_path = out_dir / f"{text_id}.ansi"
    html_path.write_text(
        render_html(stack, vocab, title=f"Saliency of text {text_id}", note=note),
        encoding="utf-8",
    )
    ansi_path.write_text(render_ansi(stack, vocab), encoding="utf-8")
    L.debug("Heatmaps of text %s written to %s", text_id, out_dir)

    return html_path, ansi_path
