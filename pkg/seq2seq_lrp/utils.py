"""Generic helpers shared by the seq2seq_lrp subpackages"""
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Union

import numpy as np

from seq2seq_lrp.exceptions import Seq2SeqLrpError

PathLike = Union[str, Path]


def round_half_up(value: float) -> int:
    """
    Round `value` to the nearest integer, halves being rounded up.

    Python's built-in `round` rounds halves to the nearest even integer, e.g., round(0.5) == 0,
    which is not what a deletion fraction expects.
    """
    return int(math.floor(value + 0.5))


def to_builtin(value: Any) -> Any:
    """
    Convert numpy scalars and arrays, tuples and nested containers into JSON serializable
    python objects.

    Non-finite floats are converted into None, JSON having no representation for them.
    """
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None

    return value


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> int:
    """
    Write `records` into `path`, one JSON object per line.

    Field order is the insertion order of each record so that files can be compared with diff.

    Returns:
        the number of written records.
    """
    count = 0
    with open(path, "w", encoding="utf-8") as out:
        for record in records:
            out.write(json.dumps(to_builtin(record)))
            out.write("\n")
            count += 1

    return count


def iter_jsonl(path: PathLike) -> Iterator[Dict[str, Any]]:
    """Iterate over the JSON objects of a line-delimited JSON file, skipping blank lines."""
    with open(path, "r", encoding="utf-8") as file_:
        for line_number, line in enumerate(file_, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as error:
                raise Seq2SeqLrpError(
                    f"Invalid JSON record on line {line_number} of {path}: {error}"
                ) from error


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    """Read all the JSON objects of a line-delimited JSON file."""
    return list(iter_jsonl(path))
