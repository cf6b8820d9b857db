"""Transmit chain: encode, interleave, Gray-map to square QAM, multiplex
across antennas, and insert periodic pilot vectors.

Bit-to-slot order: the interleaved bit stream is consumed time-major, i.e.
consecutive groups of bits_per_symbol bits fill (slot 0, antenna 0),
(slot 0, antenna 1), ..., (slot 1, antenna 0), ... over the data instants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FramingError
from .ldpc import LdpcCode, encode as ldpc_encode


@dataclass(frozen=True)
class Constellation:
    """Complex constellation with a binary label per point.

    points[i] carries the label labels[i] (row of 0/1, MSB first); for the
    factory constellations i equals the label read as a binary integer, so
    mapping is a direct table lookup.
    """

    points: np.ndarray  # (M,) complex
    labels: np.ndarray  # (M, bits_per_symbol) uint8

    @property
    def order(self) -> int:
        return self.points.shape[0]

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]


def _inverse_gray(g: np.ndarray) -> np.ndarray:
    # binary-reflected Gray decode: b = g ^ (g>>1) ^ (g>>2) ^ ...
    b = g.copy()
    n = g.copy()
    while True:
        n = n >> 1
        if not n.any():
            break
        b ^= n
    return b


def make_constellation(m: int) -> Constellation:
    """Unit-average-energy square M-QAM with per-axis reflected Gray labels.

    The first half of each label addresses the I axis, the second half the Q
    axis; adjacent grid points then differ in exactly one bit. m must be a
    power of 4.
    """
    if m < 4 or (m & (m - 1)) != 0 or int(np.log2(m)) % 2 != 0:
        raise ConfigurationError(f"square QAM requires m a power of 4, got {m}")
    bits = int(np.log2(m))
    half = bits // 2
    levels_per_axis = 1 << half

    idx = np.arange(m)
    i_label = idx >> half
    q_label = idx & (levels_per_axis - 1)
    i_pos = _inverse_gray(i_label)  # Gray label -> grid position
    q_pos = _inverse_gray(q_label)
    amp = 2.0 * np.arange(levels_per_axis) - (levels_per_axis - 1)
    pts = amp[i_pos] + 1j * amp[q_pos]
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))

    labels = ((idx[:, None] >> np.arange(bits)[::-1]) & 1).astype(np.uint8)
    return Constellation(points=pts.astype(np.complex128), labels=labels)


def bpsk_constellation() -> Constellation:
    """Two-point real constellation for toy systems and oracle tests."""
    return Constellation(
        points=np.array([1.0 + 0j, -1.0 + 0j]),
        labels=np.array([[0], [1]], dtype=np.uint8),
    )


def map_bits(cst: Constellation, bits: np.ndarray) -> np.ndarray:
    """Map a flat 0/1 vector (length divisible by bits_per_symbol) to symbols."""
    d = cst.bits_per_symbol
    b = np.asarray(bits, dtype=np.int64).reshape(-1, d)
    idx = b @ (1 << np.arange(d)[::-1])
    return cst.points[idx]


def hard_demap(cst: Constellation, symbols: np.ndarray) -> np.ndarray:
    """Nearest-point hard decisions back to label bits (flat vector)."""
    s = np.asarray(symbols).reshape(-1)
    idx = np.argmin(np.abs(s[:, None] - cst.points[None, :]), axis=1)
    return cst.labels[idx].reshape(-1)


@dataclass(frozen=True)
class Interleaver:
    """Seeded random bijection over coded-bit positions."""

    permutation: np.ndarray
    seed: int | None = None

    @property
    def length(self) -> int:
        return self.permutation.shape[0]


def make_interleaver(length: int, seed) -> Interleaver:
    rng = np.random.default_rng(seed)
    return Interleaver(permutation=rng.permutation(length), seed=seed)


def interleave(il: Interleaver, x: np.ndarray) -> np.ndarray:
    return np.asarray(x)[il.permutation]


def deinterleave(il: Interleaver, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(np.asarray(x))
    out[il.permutation] = x
    return out


def default_pilot_book(num_tx: int) -> np.ndarray:
    """DFT pilot book: column p is used at the p-th pilot instant mod num_tx.

    Entries are unit-modulus, so pilot instants carry the same per-antenna
    energy as data instants, and any num_tx consecutive pilot vectors span
    the full transmit space.
    """
    n = np.arange(num_tx)
    return np.exp(-2j * np.pi * np.outer(n, n) / num_tx)


@dataclass(frozen=True)
class FrameLayout:
    """Static frame geometry shared by transmitter and receiver."""

    num_tx: int
    frame_len: int
    pilot_spacing: int
    pilot_mask: np.ndarray     # (frame_len,) bool
    pilot_symbols: np.ndarray  # (num_tx, num_pilots)
    bits_per_symbol: int
    block_len: int             # codeword bits carried by the frame
    num_padding: int           # filler bits appended after the codeword

    @property
    def num_pilots(self) -> int:
        return int(self.pilot_mask.sum())

    @property
    def data_instants(self) -> np.ndarray:
        return np.nonzero(~self.pilot_mask)[0]

    @property
    def pilot_instants(self) -> np.ndarray:
        return np.nonzero(self.pilot_mask)[0]

    @property
    def num_data_slots(self) -> int:
        return self.frame_len - self.num_pilots

    @property
    def total_bits(self) -> int:
        return self.num_data_slots * self.num_tx * self.bits_per_symbol


def make_layout(block_len: int, num_tx: int, bits_per_symbol: int,
                pilot_spacing: int, pilot_book: np.ndarray | None = None) -> FrameLayout:
    """Size the frame for one codeword plus periodic pilots.

    Picks the smallest frame length whose non-pilot slots hold the codeword;
    leftover slot bits become recorded filler. pilot_spacing=0 disables
    pilots entirely (used by toy systems).
    """
    if pilot_spacing < 0:
        raise ConfigurationError("pilot_spacing must be >= 0")
    per_slot = num_tx * bits_per_symbol
    data_needed = -(-block_len // per_slot)  # ceil
    if pilot_spacing == 0:
        frame_len = data_needed
        mask = np.zeros(frame_len, dtype=bool)
    else:
        frame_len = data_needed
        while True:
            mask = np.zeros(frame_len, dtype=bool)
            mask[::pilot_spacing] = True
            if frame_len - int(mask.sum()) >= data_needed:
                break
            frame_len += 1
    if pilot_book is None:
        pilot_book = default_pilot_book(num_tx)
    n_p = int(mask.sum())
    pilots = pilot_book[:, np.arange(n_p) % pilot_book.shape[1]]
    num_padding = (frame_len - n_p) * per_slot - block_len
    return FrameLayout(
        num_tx=num_tx,
        frame_len=frame_len,
        pilot_spacing=pilot_spacing,
        pilot_mask=mask,
        pilot_symbols=pilots,
        bits_per_symbol=bits_per_symbol,
        block_len=block_len,
        num_padding=num_padding,
    )


@dataclass(frozen=True)
class TxFrame:
    """One transmitted frame: bits at every stage plus the symbol matrix."""

    info_bits: np.ndarray
    coded_bits: np.ndarray        # codeword (block_len,)
    padded_bits: np.ndarray       # codeword + filler, pre-interleave
    interleaved_bits: np.ndarray
    symbols: np.ndarray           # (num_tx, frame_len)
    layout: FrameLayout


def build_frame(info_bits: np.ndarray, code: LdpcCode, il: Interleaver,
                cst: Constellation, num_tx: int, pilot_spacing: int,
                pilot_book: np.ndarray | None = None, seed=0,
                layout: FrameLayout | None = None) -> TxFrame:
    """Assemble the full transmit frame for one codeword.

    seed draws the filler bits when the codeword does not exactly fill the
    data slots. The interleaver must cover codeword plus filler.
    """
    if layout is None:
        layout = make_layout(code.block_len, num_tx, cst.bits_per_symbol,
                             pilot_spacing, pilot_book)
    coded = ldpc_encode(code, info_bits)
    if layout.block_len != code.block_len:
        raise FramingError("layout was sized for a different codeword length")
    if il.length != layout.total_bits:
        raise FramingError(
            f"interleaver length {il.length} != frame bit budget {layout.total_bits}"
        )
    rng = np.random.default_rng(seed)
    pad = rng.integers(0, 2, size=layout.num_padding, dtype=np.uint8)
    padded = np.concatenate([coded, pad])
    inter = interleave(il, padded)

    data_syms = map_bits(cst, inter).reshape(layout.num_data_slots, num_tx).T
    symbols = np.empty((num_tx, layout.frame_len), dtype=np.complex128)
    symbols[:, layout.data_instants] = data_syms
    symbols[:, layout.pilot_instants] = layout.pilot_symbols
    return TxFrame(
        info_bits=np.asarray(info_bits, dtype=np.uint8),
        coded_bits=coded,
        padded_bits=padded,
        interleaved_bits=inter,
        symbols=symbols,
        layout=layout,
    )
