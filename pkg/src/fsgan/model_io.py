"""Binary model checkpoints.

Little-endian layout, magic 'FSGM', version 1:

    magic 4s | u8 version | u8 flags (bit0: generator bank present)
    shared head: trunk, disc head, cls head as net blocks
    bank (when flagged): u32 M | f64 mixing[M] | M generator net blocks

A net block is: u8 output-activation code | f64 hidden alpha |
u32 n_dims | u32 dims[n_dims] | per layer f64 weights (row-major
out x in) then f64 biases.
"""

import struct

import numpy as np

from .gan import GeneratorBank, SharedHead
from .nn import OUTPUT_ACTIVATIONS, DenseNet

MODEL_MAGIC = b"FSGM"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _pack_net(fh, net):
    fh.write(struct.pack("<Bd", OUTPUT_ACTIVATIONS.index(net.output_activation),
                         net.hidden_alpha))
    dims = net.layer_dims
    fh.write(struct.pack("<I", len(dims)))
    fh.write(np.asarray(dims, dtype="<u4").tobytes())
    for w, b in zip(net.weights, net.biases):
        fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        fh.write(np.asarray(b, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.offset = 0

    def take(self, size, what):
        if self.offset + size > len(self.blob):
            raise ModelFormatError(
                f"offset {self.offset}: truncated checkpoint while reading {what}")
        out = self.blob[self.offset:self.offset + size]
        self.offset += size
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, count, what):
        return np.frombuffer(self.take(8 * count, what), dtype="<f8").copy()


def _unpack_net(reader):
    code, alpha = reader.unpack("<Bd", "net header")
    if code >= len(OUTPUT_ACTIVATIONS):
        raise ModelFormatError(f"unknown activation code {code}")
    (n_dims,) = reader.unpack("<I", "dim count")
    if n_dims < 2:
        raise ModelFormatError(f"net needs >= 2 dims, got {n_dims}")
    dims = np.frombuffer(reader.take(4 * n_dims, "dims"), dtype="<u4").tolist()
    net = DenseNet(dims, output_activation=OUTPUT_ACTIVATIONS[code], hidden_alpha=alpha)
    for layer, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        net.weights[layer][:] = reader.array(din * dout, "weights").reshape(dout, din)
        net.biases[layer][:] = reader.array(dout, "biases")
    return net


def save_model(path, head, bank=None):
    """Write the shared head (and optionally a generator bank) to disk."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sBB", MODEL_MAGIC, MODEL_VERSION,
                             1 if bank is not None else 0))
        _pack_net(fh, head.trunk)
        _pack_net(fh, head.disc_head)
        _pack_net(fh, head.cls_head)
        if bank is not None:
            fh.write(struct.pack("<I", bank.size))
            fh.write(np.asarray(bank.mixing, dtype="<f8").tobytes())
            for gen in bank.generators:
                _pack_net(fh, gen)
    return path


def load_model(path):
    """Read a checkpoint; returns (SharedHead, GeneratorBank-or-None)."""
    with open(path, "rb") as fh:
        reader = _Reader(fh.read())
    magic, version, flags = reader.unpack("<4sBB", "header")
    if magic != MODEL_MAGIC:
        raise ModelFormatError("not a model checkpoint (bad magic)")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported checkpoint version {version}")
    head = SharedHead(_unpack_net(reader), _unpack_net(reader), _unpack_net(reader))
    bank = None
    if flags & 1:
        (m,) = reader.unpack("<I", "generator count")
        mixing = reader.array(m, "mixing weights")
        bank = GeneratorBank([_unpack_net(reader) for _ in range(m)], mixing)
    if reader.offset != len(reader.blob):
        raise ModelFormatError(
            f"offset {reader.offset}: {len(reader.blob) - reader.offset} trailing bytes")
    return head, bank
