"""Canonical versioned binary encoding of trained models.

Layout: magic "RFMSM1", one learner tag byte, the standardizer arrays, then a
learner-specific payload. All integers and floats are little-endian; arrays
are written as (dtype code, ndim, shape..., raw bytes). Round-trips are
byte-exact, so deserialized models predict identically to the originals.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ModelCodecError
from .elastic_net import ElasticNetModel
from .forest import RandomForestModel, Tree
from .kernel import KernelClassifierModel

MAGIC = b"RFMSM1"

_TAGS = {ElasticNetModel: 1, RandomForestModel: 2, KernelClassifierModel: 3}
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<i4")}
_DTYPE_CODES = {np.dtype("<f8"): 1, np.dtype("<i4"): 2}


class _Writer:
    def __init__(self):
        self.chunks: list[bytes] = []

    def u8(self, v: int):
        self.chunks.append(struct.pack("<B", v))

    def u32(self, v: int):
        self.chunks.append(struct.pack("<I", v))

    def f64(self, v: float):
        self.chunks.append(struct.pack("<d", v))

    def array(self, arr: np.ndarray, dtype: str):
        canon = np.ascontiguousarray(arr, dtype=np.dtype(dtype))
        self.u8(_DTYPE_CODES[canon.dtype])
        self.u8(canon.ndim)
        for dim in canon.shape:
            self.chunks.append(struct.pack("<Q", dim))
        self.chunks.append(canon.tobytes())

    def bytes(self) -> bytes:
        return b"".join(self.chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelCodecError("truncated model byte stream")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def array(self) -> np.ndarray:
        code = self.u8()
        if code not in _DTYPES:
            raise ModelCodecError(f"unknown array dtype code {code}")
        dtype = _DTYPES[code]
        ndim = self.u8()
        if ndim > 2:
            raise ModelCodecError(f"unsupported array rank {ndim}")
        shape = tuple(struct.unpack("<Q", self.take(8))[0] for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = self.take(count * dtype.itemsize)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    def done(self):
        if self.pos != len(self.data):
            raise ModelCodecError("trailing bytes after model payload")


def serialize_model(model) -> bytes:
    tag = _TAGS.get(type(model))
    if tag is None:
        raise ModelCodecError(f"cannot serialize {type(model).__name__}")
    w = _Writer()
    w.chunks.append(MAGIC)
    w.u8(tag)
    w.array(model.mean, "<f8")
    w.array(model.scale, "<f8")
    if tag == 1:
        w.array(model.coef, "<f8")
        w.f64(model.intercept)
    elif tag == 2:
        if not model.trees:
            raise ModelCodecError("refusing to serialize an empty forest")
        w.u32(len(model.trees))
        for tree in model.trees:
            w.array(tree.feature, "<i4")
            w.array(tree.threshold, "<f8")
            w.array(tree.left, "<i4")
            w.array(tree.right, "<i4")
            w.array(tree.leaf_prob, "<f8")
    else:
        w.array(model.support, "<f8")
        w.array(model.dual_coef, "<f8")
        w.f64(model.intercept)
        w.f64(model.sigma)
    return w.bytes()


def deserialize_model(data: bytes):
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise ModelCodecError("bad magic header; not a model byte stream")
    tag = r.u8()
    mean = r.array()
    scale = r.array()
    if mean.ndim != 1 or mean.shape != scale.shape:
        raise ModelCodecError("inconsistent standardizer arrays")
    if tag == 1:
        coef = r.array()
        intercept = r.f64()
        r.done()
        if coef.shape != mean.shape:
            raise ModelCodecError("coefficient arity does not match the standardizer")
        return ElasticNetModel(coef, intercept, mean, scale)
    if tag == 2:
        n_trees = r.u32()
        if n_trees == 0:
            raise ModelCodecError("empty forest")
        trees = []
        for _ in range(n_trees):
            feature = r.array()
            threshold = r.array()
            left = r.array()
            right = r.array()
            prob = r.array()
            n = feature.shape[0]
            if n == 0 or any(a.shape != (n,) for a in (threshold, left, right, prob)):
                raise ModelCodecError("inconsistent tree arrays")
            trees.append(Tree(feature, threshold, left, right, prob))
        r.done()
        return RandomForestModel(tuple(trees), mean, scale)
    if tag == 3:
        support = r.array()
        dual = r.array()
        intercept = r.f64()
        sigma = r.f64()
        r.done()
        if support.ndim != 2 or dual.shape != (support.shape[0],) or support.shape[1] != mean.shape[0]:
            raise ModelCodecError("inconsistent kernel model arrays")
        return KernelClassifierModel(support, dual, intercept, sigma, mean, scale)
    raise ModelCodecError(f"unknown learner tag {tag}")
