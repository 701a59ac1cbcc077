"""Replayable counter-based random streams.

Every stream is a Philox4x32-10 generator (Salmon et al., "Parallel random
numbers: as easy as 1, 2, 3") keyed by the 64-bit master seed. The 128-bit
Philox counter holds ``(draw counter, stream id)``, so a stream is fully
described by three 64-bit integers and any draw can be recomputed from them.

Draw strides (counter increments):

* ``next_uniform``       1
* ``next_exponential``   1
* ``next_categorical``   1
* ``next_gamma``         1 (inverse transform)
* ``next_uniform_pair``  1 (both halves of one block)

A Philox block yields words ``w0..w3``. The low uniform of a block uses
``w0 | w1 << 32``, the high one ``w2 | w3 << 32``; each keeps the top 52
bits ``m`` and maps them to ``(m + 0.5) / 2**52``, which lies strictly
inside (0, 1) and is exactly representable. Single draws use the low half.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import special

from .errors import ContractError, DecodeError

MASK32 = np.uint64(0xFFFFFFFF)
MASK64 = (1 << 64) - 1

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = np.uint64(0x9E3779B9)
_PHILOX_W1 = np.uint64(0xBB67AE85)
_SHIFT32 = np.uint64(32)
_SHIFT12 = np.uint64(12)
_INV52 = 2.0**-52

STATE_STRUCT = struct.Struct("<QQQ")
STATE_NBYTES = STATE_STRUCT.size  # 24


@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds. All arguments are uint64 holding 32-bit words."""
    for rnd in range(10):
        if rnd > 0:
            k0 = (k0 + _PHILOX_W0) & MASK32
            k1 = (k1 + _PHILOX_W1) & MASK32
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def raw64(seed, sid, counter):
    """64 random bits for draw ``counter`` of stream ``(seed, sid)``."""
    w0, w1, _, _ = philox4x32(
        counter & MASK32,
        counter >> _SHIFT32,
        sid & MASK32,
        sid >> _SHIFT32,
        seed & MASK32,
        seed >> _SHIFT32,
    )
    return w0 | (w1 << _SHIFT32)


@njit(cache=True, nogil=True)
def uniform_at(seed, sid, counter):
    return (float(raw64(seed, sid, counter) >> _SHIFT12) + 0.5) * _INV52


@njit(cache=True, nogil=True)
def uniform_pair_at(seed, sid, counter):
    w0, w1, w2, w3 = philox4x32(
        counter & MASK32,
        counter >> _SHIFT32,
        sid & MASK32,
        sid >> _SHIFT32,
        seed & MASK32,
        seed >> _SHIFT32,
    )
    lo = w0 | (w1 << _SHIFT32)
    hi = w2 | (w3 << _SHIFT32)
    return (
        (float(lo >> _SHIFT12) + 0.5) * _INV52,
        (float(hi >> _SHIFT12) + 0.5) * _INV52,
    )


@njit(cache=True, nogil=True)
def categorical_from_uniform(u, weights, total):
    """Smallest index whose cumulative weight exceeds ``u * total``."""
    target = u * total
    acc = 0.0
    last = -1
    for j in range(weights.shape[0]):
        w = weights[j]
        if w > 0.0:
            acc += w
            last = j
            if target < acc:
                return j
    # rounding left target >= acc; fall back to the last enabled index
    return last


@njit(cache=True, nogil=True)
def _fill_uniforms(seed, sid, counter, out):
    for i in range(out.shape[0]):
        out[i] = uniform_at(seed, sid, counter + np.uint64(i))


def _u64(value):
    return np.uint64(int(value) & MASK64)


@dataclass(frozen=True)
class StreamState:
    """Plain-data replay token of one stream."""

    master_seed: int
    stream_id: int
    counter: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id", "counter"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= MASK64:
                raise ContractError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def to_bytes(self) -> bytes:
        """24 bytes, little-endian, fields in declared order."""
        return STATE_STRUCT.pack(self.master_seed, self.stream_id, self.counter)

    @classmethod
    def from_bytes(cls, data: bytes) -> StreamState:
        if len(data) != STATE_NBYTES:
            raise DecodeError(f"stream state must be {STATE_NBYTES} bytes, got {len(data)}")
        return cls(*STATE_STRUCT.unpack(data))

    def encode(self) -> str:
        """Checksummed hex token (24 state bytes + CRC32), as written to sidecar files."""
        raw = self.to_bytes()
        return (raw + struct.pack("<I", zlib.crc32(raw))).hex()

    @classmethod
    def decode(cls, token: str) -> StreamState:
        try:
            data = bytes.fromhex(token.strip())
        except ValueError as exc:
            raise DecodeError(f"stream token is not hex: {token!r}") from exc
        if len(data) != STATE_NBYTES + 4:
            raise DecodeError(f"stream token must be {STATE_NBYTES + 4} bytes, got {len(data)}")
        raw, (crc,) = data[:STATE_NBYTES], struct.unpack("<I", data[STATE_NBYTES:])
        if zlib.crc32(raw) != crc:
            raise DecodeError("stream token checksum mismatch")
        return cls.from_bytes(raw)


class Stream:
    """A mutable cursor over one counter-based stream.

    Owned by one worker at a time; hand a :class:`StreamState` across
    workers instead of the stream itself.
    """

    __slots__ = ("master_seed", "stream_id", "counter")

    def __init__(self, master_seed: int, stream_id: int, counter: int = 0):
        self.master_seed = int(master_seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        self.counter = int(counter) & MASK64

    def __repr__(self):
        return f"Stream(seed={self.master_seed}, id={self.stream_id}, counter={self.counter})"

    def _advance(self, k=1):
        c = self.counter
        self.counter = (c + k) & MASK64
        return c

    def next_raw64(self) -> int:
        c = self._advance()
        return int(raw64(_u64(self.master_seed), _u64(self.stream_id), _u64(c)))

    def next_uniform(self) -> float:
        c = self._advance()
        return float(uniform_at(_u64(self.master_seed), _u64(self.stream_id), _u64(c)))

    def next_uniform_pair(self) -> tuple[float, float]:
        c = self._advance()
        lo, hi = uniform_pair_at(_u64(self.master_seed), _u64(self.stream_id), _u64(c))
        return float(lo), float(hi)

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` consecutive uniforms; equivalent to ``n`` calls of next_uniform."""
        out = np.empty(int(n), dtype=np.float64)
        c = self._advance(int(n))
        _fill_uniforms(_u64(self.master_seed), _u64(self.stream_id), _u64(c), out)
        return out

    def next_exponential(self, rate: float) -> float:
        if not rate > 0.0 or not math.isfinite(rate):
            raise ContractError(f"exponential rate must be positive and finite, got {rate}")
        return exponential_from_uniform(self.next_uniform(), rate)

    def next_categorical(self, weights, total=None) -> int:
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if np.any(w < 0):
            raise ContractError("categorical weights must be non-negative")
        if total is None:
            total = float(w.sum())
        if not total > 0.0:
            raise ContractError("categorical total weight must be positive")
        return int(categorical_from_uniform(self.next_uniform(), w, float(total)))

    def next_gamma(self, shape: float, rate: float) -> float:
        """Gamma(shape, rate) by inverse transform of one uniform."""
        if not (shape > 0.0 and rate > 0.0):
            raise ContractError(f"gamma needs positive shape and rate, got {shape}, {rate}")
        u = self.next_uniform()
        return float(special.gammaincinv(shape, u)) / rate


def exponential_from_uniform(u: float, rate: float) -> float:
    return -math.log(u) / rate


def make_stream(master_seed: int, stream_id: int) -> Stream:
    return Stream(master_seed, stream_id, 0)


def snapshot(stream: Stream) -> StreamState:
    return StreamState(stream.master_seed, stream.stream_id, stream.counter)


def restore(state: StreamState) -> Stream:
    return Stream(state.master_seed, state.stream_id, state.counter)


# Stream-id layout: 2-bit domain tag | 30-bit epoch | 32-bit slot.
DOMAIN_ATTEMPT = 0
DOMAIN_SELECT = 1
DOMAIN_THETA = 2
DOMAIN_MISC = 3
EPOCH_BITS = 30
SLOT_BITS = 32


def stream_id_for(domain: int, epoch: int, slot: int) -> int:
    """Positional stream id; distinct (domain, epoch, slot) never collide."""
    if not 0 <= domain < 4:
        raise ContractError(f"domain tag out of range: {domain}")
    if not 0 <= epoch < (1 << EPOCH_BITS):
        raise ContractError(f"epoch out of range: {epoch}")
    if not 0 <= slot < (1 << SLOT_BITS):
        raise ContractError(f"slot out of range: {slot}")
    return (domain << (EPOCH_BITS + SLOT_BITS)) | (epoch << SLOT_BITS) | slot
