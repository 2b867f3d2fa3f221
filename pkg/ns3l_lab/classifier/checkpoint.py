"""
Binary parameter checkpoints.

Little-endian layout: magic ``NS3L``, u32 version, u32 layer count, then for
each layer u32 rows, u32 cols, row-major f64 weights and cols f64 biases.
"""
import logging
import os
import tempfile

import numpy as np

from ns3l_lab.classifier.mlp import Params
from ns3l_lab.errors import CheckpointError
from ns3l_lab.models.config import MLPSpec

LOG = logging.getLogger(__name__)

MAGIC = b'NS3L'
VERSION = 1
_U32 = np.dtype('<u4')
_F64 = np.dtype('<f8')


def encode_checkpoint(params: Params) -> bytes:
    """Serializes the weights and biases in the layout described above."""
    chunks = [MAGIC, np.array([VERSION, len(params.weights)], dtype=_U32).tobytes()]
    for weight, bias in zip(params.weights, params.biases):
        rows, cols = weight.shape
        chunks.append(np.array([rows, cols], dtype=_U32).tobytes())
        chunks.append(weight.values.astype(_F64).tobytes(order='C'))
        chunks.append(bias.values.reshape(-1).astype(_F64).tobytes())
    return b''.join(chunks)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, dtype: np.dtype, count: int) -> np.ndarray:
        size = dtype.itemsize * count
        if self.offset + size > len(self.payload):
            raise CheckpointError(f'truncated checkpoint at byte {self.offset}')
        out = np.frombuffer(self.payload, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return out


def decode_checkpoint(payload: bytes, slope: float = 0.1, seed: int = 0) -> Params:
    """
    Rebuilds parameters from checkpoint bytes.

    Args:
        payload: Full checkpoint contents.
        slope: Leaky-ReLU slope of the restored model; the file stores weights only.
        seed: Seed recorded on the restored ``MLPSpec``.

    Returns:
        Params with layer widths taken from the file.

    Raises:
        CheckpointError: Bad magic or version, truncation, trailing bytes or
            layers whose widths do not chain.
    """
    if payload[:4] != MAGIC:
        raise CheckpointError('not an NS3L checkpoint (bad magic)')
    reader = _Reader(payload)
    reader.offset = 4
    version, layers = (int(v) for v in reader.take(_U32, 2))
    if version != VERSION:
        raise CheckpointError(f'unsupported checkpoint version {version}')
    if layers < 1:
        raise CheckpointError('checkpoint holds no layers')
    widths, arrays = [], []
    for layer in range(layers):
        rows, cols = (int(v) for v in reader.take(_U32, 2))
        if widths and rows != widths[-1]:
            raise CheckpointError(f'layer {layer} has {rows} inputs, previous layer emits {widths[-1]}')
        if not widths:
            widths.append(rows)
        widths.append(cols)
        arrays.append(reader.take(_F64, rows * cols).reshape(rows, cols).astype(np.float64))
        arrays.append(reader.take(_F64, cols).reshape(1, cols).astype(np.float64))
    if reader.offset != len(payload):
        raise CheckpointError(f'{len(payload) - reader.offset} trailing bytes after the last layer')
    try:
        spec = MLPSpec(layer_widths=tuple(widths), slope=slope, seed=seed)
    except ValueError as e:
        raise CheckpointError(f'invalid layer widths {widths}: {e}') from e
    return Params.from_arrays(spec, arrays)


def save_checkpoint(params: Params, path: str) -> None:
    """Writes the checkpoint through a temporary file so ``path`` is never left half-written."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    with os.fdopen(fd, 'wb') as handle:
        handle.write(encode_checkpoint(params))
    os.replace(tmp_path, path)
    LOG.info('Saved checkpoint with widths %s to %s', list(params.spec.layer_widths), path)


def load_checkpoint(path: str, slope: float = 0.1, seed: int = 0) -> Params:
    """Reads and decodes ``path``; an unreadable file is a ``CheckpointError``."""
    try:
        with open(path, 'rb') as handle:
            payload = handle.read()
    except OSError as e:
        raise CheckpointError(f'cannot read checkpoint {path}: {e}') from e
    return decode_checkpoint(payload, slope=slope, seed=seed)
