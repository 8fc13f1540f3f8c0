"""Binary tile-set genomes and search-space indexing.

A genome is a fixed-length bitstring encoding an ordered tile set: tiles are
laid out sequentially starting with the seed tile, each tile contributing its
four edge labels in the order north, east, south, west, each label occupying
``log2(b)`` bits, most-significant bit first.  Bit 0 is the most significant
bit of the first byte, so the hex text form reads left to right in genome
order.

A search space is the set of all genomes for ``a`` tile types and ``b``
bonding labels, optionally restricted by a mask of fixed bits (used for
32-bit subspaces of the three-tile space).
"""

from __future__ import annotations

from dataclasses import dataclass, field


class GenomeError(ValueError):
    """Invalid genome, tile set, or enumeration index."""


def _bits_per_label(b: int) -> int:
    if b < 2 or b & (b - 1):
        raise GenomeError(f"label count must be a power of 2 >= 2, got {b}")
    return b.bit_length() - 1


class Genome:
    """Fixed-length bitstring, byte-packed MSB-first.

    The length in bits is carried separately so non-byte-multiple lengths
    (e.g. 36 bits for three tiles with eight labels) are legal.  Padding bits
    in the last byte are always zero.
    """

    __slots__ = ("_bits", "length")

    def __init__(self, length: int, bits: bytes | bytearray | None = None):
        if length <= 0:
            raise GenomeError(f"genome length must be positive, got {length}")
        nbytes = (length + 7) // 8
        if bits is None:
            self._bits = bytearray(nbytes)
        else:
            if len(bits) != nbytes:
                raise GenomeError(
                    f"expected {nbytes} bytes for {length} bits, got {len(bits)}"
                )
            self._bits = bytearray(bits)
            tail = length % 8
            if tail and (self._bits[-1] & ((1 << (8 - tail)) - 1)):
                raise GenomeError("padding bits beyond the genome length must be zero")
        self.length = length

    # -- bit access ----------------------------------------------------------

    def bit(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise GenomeError(f"bit index {i} out of range [0, {self.length})")
        return (self._bits[i >> 3] >> (7 - (i & 7))) & 1

    def flip(self, i: int) -> None:
        """Toggle bit ``i`` in place."""
        if not 0 <= i < self.length:
            raise GenomeError(f"bit index {i} out of range [0, {self.length})")
        self._bits[i >> 3] ^= 1 << (7 - (i & 7))

    def set_bit(self, i: int, value: int) -> None:
        if self.bit(i) != (value & 1):
            self.flip(i)

    def hamming_weight(self) -> int:
        return sum(byte.bit_count() for byte in self._bits)

    def complement(self) -> "Genome":
        """New genome with every bit flipped."""
        out = self.copy()
        for i in range(self.length):
            out.flip(i)
        return out

    # -- conversions ---------------------------------------------------------

    def copy(self) -> "Genome":
        return Genome(self.length, bytes(self._bits))

    def to_bytes(self) -> bytes:
        return bytes(self._bits)

    def to_int(self) -> int:
        """The genome read as one big-endian integer (bit 0 most significant)."""
        return int.from_bytes(self._bits, "big") >> (8 * len(self._bits) - self.length)

    @classmethod
    def from_int(cls, length: int, value: int) -> "Genome":
        if value < 0 or value >> length:
            raise GenomeError(f"value does not fit in {length} bits")
        nbytes = (length + 7) // 8
        return cls(length, (value << (8 * nbytes - length)).to_bytes(nbytes, "big"))

    def to_text(self) -> str:
        """Text form ``0x<lowercase hex>/<bit length>``."""
        return f"0x{self._bits.hex()}/{self.length}"

    @classmethod
    def from_text(cls, text: str) -> "Genome":
        try:
            hexpart, lenpart = text.split("/")
            if not hexpart.startswith("0x"):
                raise ValueError
            length = int(lenpart)
            raw = bytes.fromhex(hexpart[2:])
        except ValueError:
            raise GenomeError(f"malformed genome text {text!r}, expected 0xHEX/BITS")
        return cls(length, raw)

    # -- dunder --------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Genome)
            and self.length == other.length
            and self._bits == other._bits
        )

    def __repr__(self) -> str:
        return f"Genome({self.to_text()})"


@dataclass(frozen=True)
class TileSet:
    """Ordered tile types; ``tiles[0]`` is the seed placed at the grid center.

    Each tile is a 4-tuple of edge labels in the order (north, east, south,
    west).
    """

    tiles: tuple[tuple[int, int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "tiles", tuple(tuple(int(v) for v in t) for t in self.tiles)
        )
        for t in self.tiles:
            if len(t) != 4:
                raise GenomeError(f"tile {t} must have exactly 4 edge labels")
            if any(v < 0 for v in t):
                raise GenomeError(f"tile {t} has a negative label")

    def __len__(self) -> int:
        return len(self.tiles)


@dataclass(frozen=True)
class SearchSpace:
    """All genomes for ``a`` tile types and ``b`` bonding labels.

    ``fixed_mask`` maps genome bit index -> forced value; the remaining free
    bits enumerate the space.  Free bit j (the j-th lowest bit of an
    enumeration index) occupies the j-th highest free genome bit position, so
    in an unmasked space the enumeration index equals the genome read as a
    big-endian integer.
    """

    a: int
    b: int
    fixed_mask: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.a < 1:
            raise GenomeError(f"tile count must be >= 1, got {self.a}")
        _bits_per_label(self.b)
        mask = tuple(sorted((int(i), int(v) & 1) for i, v in self.fixed_mask))
        positions = [i for i, _ in mask]
        if len(set(positions)) != len(positions):
            raise GenomeError("fixed_mask contains duplicate bit positions")
        if positions and not (0 <= positions[0] and positions[-1] < self.bit_length):
            raise GenomeError("fixed_mask bit position out of range")
        object.__setattr__(self, "fixed_mask", mask)

    @property
    def bits_per_label(self) -> int:
        return _bits_per_label(self.b)

    @property
    def bit_length(self) -> int:
        return self.a * 4 * self.bits_per_label

    @property
    def free_bit_count(self) -> int:
        return self.bit_length - len(self.fixed_mask)

    @property
    def cardinality(self) -> int:
        return 1 << self.free_bit_count

    def free_positions(self) -> list[int]:
        """Free genome bit positions, descending; index bit j lives at [j]."""
        fixed = {i for i, _ in self.fixed_mask}
        return [p for p in range(self.bit_length - 1, -1, -1) if p not in fixed]

    def contains(self, g: Genome) -> bool:
        return g.length == self.bit_length and all(
            g.bit(i) == v for i, v in self.fixed_mask
        )


def decode_tileset(g: Genome, s: SearchSpace) -> TileSet:
    """Read the tile set out of a genome (tile-major, N-E-S-W, MSB-first)."""
    if g.length != s.bit_length:
        raise GenomeError(
            f"genome length {g.length} does not match space bit length {s.bit_length}"
        )
    bpl = s.bits_per_label
    tiles = []
    for t in range(s.a):
        labels = []
        for e in range(4):
            base = (t * 4 + e) * bpl
            v = 0
            for j in range(bpl):
                v = (v << 1) | g.bit(base + j)
            labels.append(v)
        tiles.append(tuple(labels))
    return TileSet(tuple(tiles))


def encode_tileset(t: TileSet, s: SearchSpace) -> Genome:
    """Inverse of :func:`decode_tileset`; round-trips bit-exactly."""
    if len(t) != s.a:
        raise GenomeError(f"tile set has {len(t)} tiles, space expects {s.a}")
    bpl = s.bits_per_label
    g = Genome(s.bit_length)
    for ti, tile in enumerate(t.tiles):
        for e, label in enumerate(tile):
            if not 0 <= label < s.b:
                raise GenomeError(f"label {label} out of range [0, {s.b})")
            base = (ti * 4 + e) * bpl
            for j in range(bpl):
                g.set_bit(base + j, (label >> (bpl - 1 - j)) & 1)
    return g


def genome_at_index(s: SearchSpace, i: int) -> Genome:
    """The i-th genome of the space; bijective over [0, cardinality)."""
    if not 0 <= i < s.cardinality:
        raise GenomeError(f"index {i} out of range [0, {s.cardinality})")
    g = Genome(s.bit_length)
    for pos, value in s.fixed_mask:
        g.set_bit(pos, value)
    for j, pos in enumerate(s.free_positions()):
        g.set_bit(pos, (i >> j) & 1)
    return g


def index_of_genome(s: SearchSpace, g: Genome) -> int:
    """Inverse of :func:`genome_at_index`."""
    if not s.contains(g):
        raise GenomeError("genome does not belong to the space")
    i = 0
    for j, pos in enumerate(s.free_positions()):
        i |= g.bit(pos) << j
    return i


def hamming_weight(g: Genome) -> int:
    """Number of set bits."""
    return g.hamming_weight()


# -- mask presets -------------------------------------------------------------

def _s32_mask() -> tuple[tuple[int, int], ...]:
    # Third tile: west label forced to 0 (3 bits) and south label's lowest
    # bit forced to 0, leaving a 2^32 subspace of the 36-bit space.
    return ((32, 0), (33, 0), (34, 0), (35, 0))


def _s32_inert2_mask() -> tuple[tuple[int, int], ...]:
    # As s32_3_8, with the second tile additionally forced fully inert.
    return tuple((i, 0) for i in range(12, 24)) + _s32_mask()


MASK_PRESETS: dict[str, tuple[int, int, tuple[tuple[int, int], ...]]] = {
    # name -> (a, b, fixed_mask)
    "s32_3_8": (3, 8, _s32_mask()),
    "s32_3_8_inert2": (3, 8, _s32_inert2_mask()),
}


def space_from_preset(name: str) -> SearchSpace:
    try:
        a, b, mask = MASK_PRESETS[name]
    except KeyError:
        raise GenomeError(
            f"unknown mask preset {name!r}; known: {sorted(MASK_PRESETS)}"
        )
    return SearchSpace(a, b, mask)
