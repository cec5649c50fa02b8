"""Weight containers, initialization and serialization for the recurrent cells.

Two variants are supported:

* ``"rnn"``  -- simple recurrent cell, parameters W_h, U_h, b_h plus the
  linear output projection W_y, b_y.
* ``"lstm"`` -- standard LSTM cell with forget/input/output gates and a
  candidate path (W_f, U_f, b_f, W_i, U_i, b_i, W_o, U_o, b_o,
  W_c, U_c, b_c) plus the same output projection.

All arrays are float64.  W_* act on the input (hidden x input), U_* act on
the previous hidden state (hidden x hidden), b_* are bias vectors.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

RNN_KEYS = ("W_h", "U_h", "b_h", "W_y", "b_y")
LSTM_KEYS = (
    "W_f", "U_f", "b_f",
    "W_i", "U_i", "b_i",
    "W_o", "U_o", "b_o",
    "W_c", "U_c", "b_c",
    "W_y", "b_y",
)

_MAGIC = b"NPVW"
_FORMAT_VERSION = 1
_VARIANT_TAGS = {"rnn": 0, "lstm": 1}
_VARIANT_FROM_TAG = {v: k for k, v in _VARIANT_TAGS.items()}


class WeightFormatError(ValueError):
    """Raised when a serialized weight record cannot be decoded."""


def param_keys(variant: str) -> tuple[str, ...]:
    if variant == "rnn":
        return RNN_KEYS
    if variant == "lstm":
        return LSTM_KEYS
    raise ValueError(f"unknown cell variant: {variant!r}")


@dataclass
class WeightSet:
    """Full parameter set of one recurrent network."""

    variant: str
    input_dim: int
    hidden_dim: int
    output_dim: int
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        keys = param_keys(self.variant)
        if tuple(self.params.keys()) != keys:
            raise ValueError(
                f"expected parameter keys {keys}, got {tuple(self.params.keys())}"
            )
        for name, value in self.params.items():
            expected = self.shape_of(name)
            if value.shape != expected:
                raise ValueError(
                    f"parameter {name} has shape {value.shape}, expected {expected}"
                )
            if not np.all(np.isfinite(value)):
                raise ValueError(f"parameter {name} contains non-finite entries")

    def shape_of(self, name: str) -> tuple[int, ...]:
        d, h, o = self.input_dim, self.hidden_dim, self.output_dim
        if name == "W_y":
            return (o, h)
        if name == "b_y":
            return (o,)
        if name.startswith("W_"):
            return (h, d)
        if name.startswith("U_"):
            return (h, h)
        return (h,)

    def copy(self) -> "WeightSet":
        return WeightSet(
            variant=self.variant,
            input_dim=self.input_dim,
            hidden_dim=self.hidden_dim,
            output_dim=self.output_dim,
            params={k: v.copy() for k, v in self.params.items()},
        )

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def fingerprint(self) -> int:
        """Order-sensitive checksum over all parameter bytes."""
        acc = 0
        for key in param_keys(self.variant):
            acc = (acc * 1000003 + hash(self.params[key].tobytes())) & 0xFFFFFFFFFFFFFFFF
        return acc

    def to_bytes(self) -> bytes:
        chunks = [
            _MAGIC,
            struct.pack("<BB", _FORMAT_VERSION, _VARIANT_TAGS[self.variant]),
            struct.pack("<III", self.input_dim, self.hidden_dim, self.output_dim),
        ]
        for key in param_keys(self.variant):
            chunks.append(np.ascontiguousarray(self.params[key]).tobytes())
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "WeightSet":
        if blob[:4] != _MAGIC:
            raise WeightFormatError("bad magic; not a weight record")
        version, tag = struct.unpack_from("<BB", blob, 4)
        if version != _FORMAT_VERSION:
            raise WeightFormatError(f"unsupported weight format version {version}")
        if tag not in _VARIANT_FROM_TAG:
            raise WeightFormatError(f"unknown variant tag {tag}")
        variant = _VARIANT_FROM_TAG[tag]
        d, h, o = struct.unpack_from("<III", blob, 6)
        offset = 6 + 12
        params: dict[str, np.ndarray] = {}
        probe = cls.__new__(cls)
        probe.variant = variant
        probe.input_dim, probe.hidden_dim, probe.output_dim = d, h, o
        for key in param_keys(variant):
            shape = probe.shape_of(key)
            count = int(np.prod(shape))
            end = offset + 8 * count
            if end > len(blob):
                raise WeightFormatError("truncated weight record")
            params[key] = np.frombuffer(blob[offset:end], dtype=np.float64).reshape(shape).copy()
            offset = end
        if offset != len(blob):
            raise WeightFormatError("trailing bytes after weight record")
        return cls(variant=variant, input_dim=d, hidden_dim=h, output_dim=o, params=params)

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path: str) -> "WeightSet":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def init_weights(
    variant: str,
    input_dim: int,
    hidden_dim: int,
    output_dim: int,
    rng: np.random.Generator,
) -> WeightSet:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] matrices, zero biases.

    The LSTM forget-gate bias starts at 1 so early training does not flush
    the cell state.
    """
    if input_dim < 1 or hidden_dim < 1 or output_dim < 1:
        raise ValueError("all dimensions must be >= 1")
    params: dict[str, np.ndarray] = {}
    probe = WeightSet.__new__(WeightSet)
    probe.variant = variant
    probe.input_dim, probe.hidden_dim, probe.output_dim = input_dim, hidden_dim, output_dim
    for key in param_keys(variant):
        shape = probe.shape_of(key)
        if key.startswith("b_"):
            value = np.zeros(shape)
            if key == "b_f":
                value[:] = 1.0
        else:
            limit = 1.0 / np.sqrt(shape[1])
            value = rng.uniform(-limit, limit, size=shape)
        params[key] = value
    return WeightSet(
        variant=variant,
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        output_dim=output_dim,
        params=params,
    )
