"""Synthetic corpus with planted input-to-summary dependencies.

Every text is made of noise tokens and of one or more keywords (triggers) placed at random
positions. The target summary of a text is the concatenation of the summary templates of its
keywords, in the order of their positions, followed by STOP. Nothing else in the text influences
the target, so the positions of the keywords are the ground truth of what a faithful attribution
must point at.

Optional blank texts hold noise tokens only and have an empty target summary, so that a model
trained with them summarizes a text whose keyword was deleted by an empty summary.

The default vocabulary layout is

    [specials | K keywords | K summary targets | K summary fillers | noise]

where the template of the k-th keyword is (k-th target, k-th filler) for the default summary
length of 2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from seq2seq_lrp.exceptions import Seq2SeqLrpError
from seq2seq_lrp.model.vocab import SPECIAL_IDS, SPECIAL_TOKENS, STOP_ID, Vocab
from seq2seq_lrp.model.weights import ModelConfig
from seq2seq_lrp.utils import PathLike, iter_jsonl, write_jsonl

L = logging.getLogger(__name__)

DEFAULT_NUM_TEXTS = 200
DEFAULT_TEXT_LEN = 10
DEFAULT_NUM_KEYWORDS = 8
DEFAULT_SUMMARY_LEN = 2
RECORD_KEYS = ("text_id", "input_ids", "target_ids", "trigger_positions", "planted_tokens")


def _is_count(value: Any, minimum: int) -> bool:
    return (
        not isinstance(value, bool) and isinstance(value, (int, np.integer)) and value >= minimum
    )


@dataclass(frozen=True)
class SyntheticCorpusSpec:  # pylint: disable=too-many-instance-attributes
    """
    Description of a synthetic corpus.

    Attributes:
        num_texts: number of texts.
        text_len: number of tokens of every text.
        num_triggers: number of keywords planted in every text.
        trigger_table: keyword id -> summary template (ids, STOP excluded). The first id of a
            template is the token planted by the keyword.
        noise_range: half-open range [low, high) of the noise token ids.
        seed: seed of the generator.
        vocab_size: size of the vocabulary.
        num_blank_texts: number of additional texts without keyword, whose target summary is
            empty (STOP only). They are spread among the other texts.
    """

    num_texts: int
    text_len: int
    num_triggers: int
    trigger_table: Mapping[int, Tuple[int, ...]]
    noise_range: Tuple[int, int]
    seed: int = 0
    vocab_size: int = field(default=0)
    num_blank_texts: int = 0

    def __post_init__(self) -> None:
        for name in ("num_texts", "text_len", "num_triggers"):
            value = getattr(self, name)
            if not _is_count(value, 1):
                raise Seq2SeqLrpError(f"{name} must be a positive integer, got {value!r}.")
        if not _is_count(self.num_blank_texts, 0):
            raise Seq2SeqLrpError(
                f"num_blank_texts must be a non-negative integer, got {self.num_blank_texts!r}."
            )
        if self.num_triggers > self.text_len:
            raise Seq2SeqLrpError(
                f"Cannot plant {self.num_triggers} triggers in texts of {self.text_len} tokens."
            )
        if self.num_triggers > len(self.trigger_table):
            raise Seq2SeqLrpError(
                f"Cannot plant {self.num_triggers} distinct triggers with "
                f"{len(self.trigger_table)} keywords."
            )
        low, high = self.noise_range
        if not len(SPECIAL_TOKENS) <= low < high:
            raise Seq2SeqLrpError(f"Invalid noise range {self.noise_range}.")
        upper = max(
            [high]
            + [int(key) + 1 for key in self.trigger_table]
            + [int(id_) + 1 for template in self.trigger_table.values() for id_ in template]
        )
        if self.vocab_size == 0:
            object.__setattr__(self, "vocab_size", upper)
        elif self.vocab_size < upper:
            raise Seq2SeqLrpError(
                f"vocab_size {self.vocab_size} is too small for the ids of the corpus ({upper})."
            )
        for keyword, template in self.trigger_table.items():
            if keyword in SPECIAL_IDS or low <= keyword < high:
                raise Seq2SeqLrpError(
                    f"Keyword {keyword} overlaps the special ids or the noise range {low}-{high}."
                )
            if not template or any(id_ in SPECIAL_IDS for id_ in template):
                raise Seq2SeqLrpError(
                    f"The summary template of keyword {keyword} must be a non-empty sequence of "
                    "non-special ids."
                )

    @classmethod
    def default(  # pylint: disable=too-many-arguments
        cls,
        vocab_size: int = 48,
        num_keywords: int = DEFAULT_NUM_KEYWORDS,
        num_texts: int = DEFAULT_NUM_TEXTS,
        text_len: int = DEFAULT_TEXT_LEN,
        num_triggers: int = 1,
        summary_len: int = DEFAULT_SUMMARY_LEN,
        seed: int = 0,
        num_blank_texts: int = 0,
    ) -> "SyntheticCorpusSpec":
        """
        Corpus spec with the default vocabulary layout.

        Raises:
            Seq2SeqLrpError if the vocabulary leaves no room for noise tokens or if
            summary_len is not 1 or 2.
        """
        if summary_len not in (1, 2):
            raise Seq2SeqLrpError(f"summary_len must be 1 or 2, got {summary_len}.")
        first_keyword = len(SPECIAL_TOKENS)
        first_target = first_keyword + num_keywords
        first_filler = first_target + num_keywords
        first_noise = first_filler + num_keywords
        if first_noise >= vocab_size:
            raise Seq2SeqLrpError(
                f"A vocabulary of {vocab_size} tokens leaves no room for noise with "
                f"{num_keywords} keywords."
            )
        table = {
            first_keyword + k: (first_target + k, first_filler + k)[:summary_len]
            for k in range(num_keywords)
        }

        return cls(
            num_texts=num_texts,
            text_len=text_len,
            num_triggers=num_triggers,
            trigger_table=table,
            noise_range=(first_noise, vocab_size),
            seed=seed,
            vocab_size=vocab_size,
            num_blank_texts=num_blank_texts,
        )

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "SyntheticCorpusSpec":
        """Create a default-layout spec from the `corpus` section of a configuration file."""
        allowed = {
            "vocab_size",
            "num_keywords",
            "num_texts",
            "text_len",
            "num_triggers",
            "summary_len",
            "num_blank_texts",
            "seed",
        }
        unknown = set(config) - allowed
        if unknown:
            raise Seq2SeqLrpError(f"Unknown corpus configuration keys: {sorted(unknown)}")
        return cls.default(**{key: int(value) for key, value in config.items()})

    def vocab(self) -> Vocab:
        """Vocabulary naming the keywords, the summary tokens and the noise tokens."""
        names: Dict[int, str] = {}
        for k, (keyword, template) in enumerate(sorted(self.trigger_table.items())):
            names[keyword] = f"key{k}"
            for rank, id_ in enumerate(template):
                names.setdefault(id_, f"sum{k}" if rank == 0 else f"fill{k}")
        low, high = self.noise_range
        for id_ in range(low, high):
            names.setdefault(id_, f"w{id_ - low}")

        return Vocab.synthetic(self.vocab_size, names)

    def check(self, config: ModelConfig) -> None:
        """
        Raise if the corpus does not fit the model dimensions.
        """
        if self.text_len > config.max_input_len:
            raise Seq2SeqLrpError(
                f"text_len ({self.text_len}) exceeds max_input_len ({config.max_input_len})."
            )
        if self.vocab_size > config.vocab_size:
            raise Seq2SeqLrpError(
                f"The corpus uses {self.vocab_size} ids, the model only {config.vocab_size}."
            )
        longest = self.num_triggers * max(len(t) for t in self.trigger_table.values()) + 1
        if longest > config.max_output_len:
            L.warning(
                "Target summaries of up to %d tokens exceed max_output_len (%d)",
                longest,
                config.max_output_len,
            )


@dataclass(frozen=True)
class CorpusPair:
    """
    One text of a corpus.

    Attributes:
        text_id: identifier of the text.
        input_ids: token ids of the text.
        target_ids: gold summary, ending with STOP.
        trigger_positions: positions of the planted keywords, increasing.
        planted_tokens: for every trigger, the summary token it determines.
    """

    text_id: str
    input_ids: List[int]
    target_ids: List[int]
    trigger_positions: List[int] = field(default_factory=list)
    planted_tokens: List[int] = field(default_factory=list)

    def to_record(self) -> Dict[str, Any]:
        """JSON record of the pair."""
        return {key: getattr(self, key) for key in RECORD_KEYS}

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "CorpusPair":
        """
        Pair from a JSON record.

        Only text_id and input_ids are mandatory, so that plain texts can be explained.
        """
        for key in ("text_id", "input_ids"):
            if key not in record:
                raise Seq2SeqLrpError(f"Corpus record misses the key {key!r}: {dict(record)}")
        return cls(
            text_id=str(record["text_id"]),
            input_ids=[int(id_) for id_ in record["input_ids"]],
            target_ids=[int(id_) for id_ in record.get("target_ids", [])],
            trigger_positions=[int(p) for p in record.get("trigger_positions", [])],
            planted_tokens=[int(id_) for id_ in record.get("planted_tokens", [])],
        )


def generate_synthetic_corpus(spec: SyntheticCorpusSpec) -> List[CorpusPair]:
    """
    Generate the texts of `spec`.

    The generation only depends on `spec`: the same seed gives the same corpus.
    """
    rng = np.random.default_rng(spec.seed)
    keywords = np.array(sorted(spec.trigger_table), dtype=np.int64)
    low, high = spec.noise_range
    width = len(str(spec.num_texts - 1))
    pairs = []
    for index in range(spec.num_texts):
        input_ids = rng.integers(low, high, size=spec.text_len)
        positions = np.sort(rng.choice(spec.text_len, size=spec.num_triggers, replace=False))
        planted = rng.choice(keywords, size=spec.num_triggers, replace=False)
        input_ids[positions] = planted
        target_ids: List[int] = []
        planted_tokens = []
        for keyword in planted:
            template = spec.trigger_table[int(keyword)]
            target_ids.extend(int(id_) for id_ in template)
            planted_tokens.append(int(template[0]))
        target_ids.append(STOP_ID)
        pairs.append(
            CorpusPair(
                text_id=f"text{index:0{width}d}",
                input_ids=[int(id_) for id_ in input_ids],
                target_ids=target_ids,
                trigger_positions=[int(p) for p in positions],
                planted_tokens=planted_tokens,
            )
        )
    L.info("Generated %d texts with %d triggers each", len(pairs), spec.num_triggers)
    if spec.num_blank_texts == 0:
        return pairs

    width = len(str(spec.num_blank_texts - 1))
    blanks = iter(
        [
            CorpusPair(
                text_id=f"blank{index:0{width}d}",
                input_ids=[int(id_) for id_ in rng.integers(low, high, size=spec.text_len)],
                target_ids=[STOP_ID],
            )
            for index in range(spec.num_blank_texts)
        ]
    )
    total = len(pairs) + spec.num_blank_texts
    slots = set(rng.choice(total, size=spec.num_blank_texts, replace=False).tolist())
    texts = iter(pairs)
    L.info("Added %d texts without keyword", spec.num_blank_texts)

    return [next(blanks) if index in slots else next(texts) for index in range(total)]


def save_corpus(path: PathLike, pairs: Sequence[CorpusPair]) -> int:
    """Write the pairs as JSON lines. Returns the number of written pairs."""
    return write_jsonl(path, (pair.to_record() for pair in pairs))


def load_corpus(path: PathLike) -> List[CorpusPair]:
    """
    Read a corpus file.

    Raises:
        Seq2SeqLrpError if a record is invalid or if two records share a text_id.
    """
    pairs = [CorpusPair.from_record(record) for record in iter_jsonl(path)]
    seen = set()
    for pair in pairs:
        if pair.text_id in seen:
            raise Seq2SeqLrpError(f"Duplicate text_id {pair.text_id!r} in {path}.")
        seen.add(pair.text_id)

    return pairs


def split_corpus(
    pairs: Sequence[CorpusPair], held_out_fraction: float
) -> Tuple[List[CorpusPair], List[CorpusPair]]:
    """
    Split the corpus into training and held-out texts, the held-out texts being the last ones.

    At least one text is kept for training.
    """
    if not 0.0 <= held_out_fraction < 1.0:
        raise Seq2SeqLrpError(f"held_out_fraction must lie in [0, 1), got {held_out_fraction}.")
    held_out = min(len(pairs) - 1, int(round(held_out_fraction * len(pairs)))) if pairs else 0
    cut = len(pairs) - max(0, held_out)

    return list(pairs[:cut]), list(pairs[cut:])


def texts_from_file(path: PathLike, vocab: Vocab) -> List[CorpusPair]:
    """
    Read plain texts, one per line, tokenized on whitespace.

    Unknown words are mapped to the UNKNOWN token; empty lines are skipped.
    """
    pairs = []
    with open(path, "r", encoding="utf-8") as file_:
        for line_number, line in enumerate(file_, start=1):
            words = line.split()
            if words:
                pairs.append(CorpusPair(f"line{line_number}", vocab.encode(words), []))

    return pairs


def find_triggers(pair: CorpusPair, spec: Optional[SyntheticCorpusSpec] = None) -> List[int]:
    """
    Positions of `pair.input_ids` holding a keyword.

    With no spec, the positions recorded in the pair are returned.
    """
    if spec is None:
        return list(pair.trigger_positions)

    return [t for t, id_ in enumerate(pair.input_ids) if id_ in spec.trigger_table]
