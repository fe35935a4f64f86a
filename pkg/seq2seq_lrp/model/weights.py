"""Configuration and trainable parameters of the summarizer, with their binary serialization.

The weights file is self-describing:

- the 8 bytes magic `S2SLRPW1`,
- the six integers of the model configuration (vocab_size, embed_dim, hidden_dim,
  max_input_len, max_output_len, maps_per_text), little-endian int64,
- the number of parameter blocks, little-endian int64,
- for each block: name length (little-endian uint32), utf-8 name, rows and cols
  (little-endian int64), then rows * cols little-endian float64 values in row-major order.
  Vectors are stored as single-column blocks.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
from atlas_commons.typing import FloatArray

from seq2seq_lrp.exceptions import Seq2SeqLrpError

MAGIC = b"S2SLRPW1"
GATES = ("input", "forget", "output", "candidate")

# desk-scale reduction of the 50000 / 128 / 254 / 400 / 200 / 50 setting of the CNN/Daily Mail
# summarizer, see ModelConfig.full_scale
DEFAULT_VOCAB_SIZE = 200
DEFAULT_EMBED_DIM = 16
DEFAULT_HIDDEN_DIM = 32
DEFAULT_MAX_INPUT_LEN = 64
DEFAULT_MAX_OUTPUT_LEN = 24
DEFAULT_MAPS_PER_TEXT = 12


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions of the summarizer."""

    vocab_size: int = DEFAULT_VOCAB_SIZE
    embed_dim: int = DEFAULT_EMBED_DIM
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    max_input_len: int = DEFAULT_MAX_INPUT_LEN
    max_output_len: int = DEFAULT_MAX_OUTPUT_LEN
    maps_per_text: int = DEFAULT_MAPS_PER_TEXT

    def __post_init__(self) -> None:
        for field_ in fields(self):
            value = getattr(self, field_.name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise Seq2SeqLrpError(
                    f"ModelConfig.{field_.name} must be a positive integer, got {value!r}."
                )
        if self.vocab_size < 4:
            raise Seq2SeqLrpError("ModelConfig.vocab_size must leave room for a non-special token.")
        if self.maps_per_text > self.max_output_len:
            raise Seq2SeqLrpError(
                f"maps_per_text ({self.maps_per_text}) cannot exceed max_output_len "
                f"({self.max_output_len})."
            )

    @classmethod
    def full_scale(cls) -> "ModelConfig":
        """The dimensions of the CNN/Daily Mail summarizer, expressible but not trained here."""
        return cls(50000, 128, 254, 400, 200, 50)

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "ModelConfig":
        """Create a configuration from a dict, unknown keys raise."""
        unknown = set(config) - {field_.name for field_ in fields(cls)}
        if unknown:
            raise Seq2SeqLrpError(f"Unknown model configuration keys: {sorted(unknown)}")
        return cls(**{key: int(value) for key, value in config.items()})

    def as_tuple(self) -> Tuple[int, ...]:
        """Configuration integers in header order."""
        return tuple(int(getattr(self, field_.name)) for field_ in fields(self))

    def to_dict(self) -> Dict[str, int]:
        """Plain dict of the configuration."""
        return {key: int(value) for key, value in asdict(self).items()}

    def with_maps_per_text(self, maps_per_text: int) -> "ModelConfig":
        """Copy of the configuration with another number of saliency maps per text."""
        return ModelConfig(**{**self.to_dict(), "maps_per_text": int(maps_per_text)})


@dataclass(frozen=True, eq=False)
class LstmWeights:
    """
    Parameters of one LSTM cell.

    The four gates are stacked along the first axis in the order of `GATES`: input gate i,
    forget gate f, output gate o and candidate g.

    Attributes:
        w_input: input-to-hidden matrix of shape (4 * hidden_dim, input_dim).
        w_hidden: hidden-to-hidden matrix of shape (4 * hidden_dim, hidden_dim).
        bias: vector of shape (4 * hidden_dim,).
    """

    w_input: FloatArray
    w_hidden: FloatArray
    bias: FloatArray

    @property
    def hidden_dim(self) -> int:
        """Size of the hidden and cell states."""
        return self.w_hidden.shape[1]

    @property
    def input_dim(self) -> int:
        """Size of the step input."""
        return self.w_input.shape[1]

    def gate(self, name: str) -> Tuple[FloatArray, FloatArray, FloatArray]:
        """
        Return the input-to-hidden matrix, hidden-to-hidden matrix and bias of the gate `name`.

        The returned arrays are views on the stacked parameters.
        """
        rows = gate_slice(GATES.index(name), self.hidden_dim)
        return self.w_input[rows], self.w_hidden[rows], self.bias[rows]


def gate_slice(gate_index: int, hidden_dim: int) -> slice:
    """Rows of the stacked LSTM parameters corresponding to the gate of index `gate_index`."""
    return slice(gate_index * hidden_dim, (gate_index + 1) * hidden_dim)


@dataclass(frozen=True, eq=False)
class AttentionWeights:
    """
    Parameters of the additive attention e_j = v^T tanh(w_query @ s + w_key @ h_j).

    Attributes:
        w_query: matrix of shape (hidden_dim, hidden_dim) applied to the decoder state.
        w_key: matrix of shape (hidden_dim, 2 * hidden_dim) applied to the encoder states.
        v: vector of shape (hidden_dim,).
    """

    w_query: FloatArray
    w_key: FloatArray
    v: FloatArray


@dataclass(frozen=True, eq=False)
class ModelWeights:
    """All trainable parameters of the summarizer."""

    config: ModelConfig
    embedding: FloatArray
    encoder_fwd: LstmWeights
    encoder_bwd: LstmWeights
    decoder: LstmWeights
    attention: AttentionWeights
    w_out: FloatArray
    b_out: FloatArray

    def __post_init__(self) -> None:
        expected = parameter_shapes(self.config)
        for name, array in self.parameters().items():
            if array.shape != expected[name]:
                raise Seq2SeqLrpError(
                    f"Parameter {name} has shape {array.shape}, expected {expected[name]} for "
                    f"{self.config}."
                )

    def parameters(self) -> Dict[str, FloatArray]:
        """
        Named parameters in serialization order.

        The arrays are not copied: modifying them modifies the weights.
        """
        parameters = {"embedding": self.embedding}
        for prefix in ("encoder_fwd", "encoder_bwd", "decoder"):
            lstm = getattr(self, prefix)
            parameters[f"{prefix}.w_input"] = lstm.w_input
            parameters[f"{prefix}.w_hidden"] = lstm.w_hidden
            parameters[f"{prefix}.bias"] = lstm.bias
        parameters["attention.w_query"] = self.attention.w_query
        parameters["attention.w_key"] = self.attention.w_key
        parameters["attention.v"] = self.attention.v
        parameters["projection.w_out"] = self.w_out
        parameters["projection.b_out"] = self.b_out

        return parameters

    @classmethod
    def from_parameters(
        cls, config: ModelConfig, parameters: Mapping[str, FloatArray]
    ) -> "ModelWeights":
        """Assemble weights from named parameters, without copying them."""
        missing = set(parameter_shapes(config)) - set(parameters)
        if missing:
            raise Seq2SeqLrpError(f"Missing parameters: {sorted(missing)}")

        def _lstm(prefix: str) -> LstmWeights:
            return LstmWeights(
                parameters[f"{prefix}.w_input"],
                parameters[f"{prefix}.w_hidden"],
                parameters[f"{prefix}.bias"],
            )

        return cls(
            config=config,
            embedding=parameters["embedding"],
            encoder_fwd=_lstm("encoder_fwd"),
            encoder_bwd=_lstm("encoder_bwd"),
            decoder=_lstm("decoder"),
            attention=AttentionWeights(
                parameters["attention.w_query"],
                parameters["attention.w_key"],
                parameters["attention.v"],
            ),
            w_out=parameters["projection.w_out"],
            b_out=parameters["projection.b_out"],
        )

    def copy(self) -> "ModelWeights":
        """Deep copy of the weights."""
        return ModelWeights.from_parameters(
            self.config, {name: array.copy() for name, array in self.parameters().items()}
        )

    def map_parameters(self, function) -> "ModelWeights":
        """New weights whose parameters are `function(name, array)`."""
        return ModelWeights.from_parameters(
            self.config,
            {
                name: np.asarray(function(name, array), dtype=np.float64)
                for name, array in self.parameters().items()
            },
        )


def parameter_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Shapes of the named parameters implied by `config`, in serialization order."""
    hidden = config.hidden_dim
    shapes: Dict[str, Tuple[int, ...]] = {"embedding": (config.vocab_size, config.embed_dim)}
    input_dims = {
        "encoder_fwd": config.embed_dim,
        "encoder_bwd": config.embed_dim,
        # previous token embedding and attention context
        "decoder": config.embed_dim + 2 * hidden,
    }
    for prefix, input_dim in input_dims.items():
        shapes[f"{prefix}.w_input"] = (4 * hidden, input_dim)
        shapes[f"{prefix}.w_hidden"] = (4 * hidden, hidden)
        shapes[f"{prefix}.bias"] = (4 * hidden,)
    shapes["attention.w_query"] = (hidden, hidden)
    shapes["attention.w_key"] = (hidden, 2 * hidden)
    shapes["attention.v"] = (hidden,)
    shapes["projection.w_out"] = (config.vocab_size, hidden)
    shapes["projection.b_out"] = (config.vocab_size,)

    return shapes


def zero_weights(config: ModelConfig) -> ModelWeights:
    """Weights with every parameter set to zero."""
    return ModelWeights.from_parameters(
        config, {name: np.zeros(shape) for name, shape in parameter_shapes(config).items()}
    )


def initialize_weights(config: ModelConfig, seed: int = 0, scale: float = 0.1) -> ModelWeights:
    """
    Draw every parameter uniformly in [-scale, scale].

    Parameters are drawn in serialization order from a single generator so that a seed
    determines the weights bit for bit.
    """
    rng = np.random.default_rng(seed)
    return ModelWeights.from_parameters(
        config,
        {
            name: rng.uniform(-scale, scale, size=shape)
            for name, shape in parameter_shapes(config).items()
        },
    )


def save_weights(path: Union[str, Path], weights: ModelWeights) -> None:
    """Write `weights` into the binary file `path`, see the module docstring for the layout."""
    parameters = weights.parameters()
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(np.asarray(weights.config.as_tuple(), dtype="<i8").tobytes())
        out.write(np.asarray([len(parameters)], dtype="<i8").tobytes())
        for name, array in parameters.items():
            encoded_name = name.encode("utf-8")
            rows = array.shape[0]
            cols = array.shape[1] if array.ndim == 2 else 1
            out.write(np.asarray([len(encoded_name)], dtype="<u4").tobytes())
            out.write(encoded_name)
            out.write(np.asarray([rows, cols], dtype="<i8").tobytes())
            out.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


class _Reader:
    """Sequential reader over the bytes of a weights file."""

    def __init__(self, buffer: bytes, path: Union[str, Path]) -> None:
        self.buffer = buffer
        self.offset = 0
        self.path = path

    def read(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.offset + size > len(self.buffer):
            raise Seq2SeqLrpError(f"Unexpected end of the weights file {self.path}.")
        array = np.frombuffer(self.buffer, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return array

    def read_bytes(self, size: int) -> bytes:
        if self.offset + size > len(self.buffer):
            raise Seq2SeqLrpError(f"Unexpected end of the weights file {self.path}.")
        chunk = self.buffer[self.offset : self.offset + size]
        self.offset += size
        return chunk


def load_weights(path: Union[str, Path]) -> ModelWeights:
    """
    Load weights written by `save_weights`.

    Raises:
        Seq2SeqLrpError if the file is not a weights file, is truncated or holds parameters
        inconsistent with its header.
    """
    try:
        with open(path, "rb") as file_:
            buffer = file_.read()
    except OSError as error:
        raise Seq2SeqLrpError(f"Cannot read the weights file {path}: {error}") from error

    reader = _Reader(buffer, path)
    if reader.read_bytes(len(MAGIC)) != MAGIC:
        raise Seq2SeqLrpError(f"{path} is not a seq2seq-lrp weights file.")
    config = ModelConfig(*(int(value) for value in reader.read("<i8", 6)))
    block_count = int(reader.read("<i8", 1)[0])
    expected = parameter_shapes(config)
    parameters = {}
    for _ in range(block_count):
        name_length = int(reader.read("<u4", 1)[0])
        name = reader.read_bytes(name_length).decode("utf-8")
        rows, cols = (int(value) for value in reader.read("<i8", 2))
        if name not in expected:
            raise Seq2SeqLrpError(f"Unknown parameter block {name!r} in {path}.")
        data = reader.read("<f8", rows * cols).astype(np.float64)
        shape = expected[name]
        if (rows, cols) != (shape[0], shape[1] if len(shape) == 2 else 1):
            raise Seq2SeqLrpError(
                f"Parameter block {name!r} of {path} has shape ({rows}, {cols}), "
                f"expected {shape}."
            )
        parameters[name] = data.reshape(shape)
    if reader.offset != len(buffer):
        raise Seq2SeqLrpError(f"Trailing bytes after the last parameter block of {path}.")
    if not all(np.all(np.isfinite(array)) for array in parameters.values()):
        raise Seq2SeqLrpError(f"The weights file {path} holds non-finite values.")

    return ModelWeights.from_parameters(config, parameters)
