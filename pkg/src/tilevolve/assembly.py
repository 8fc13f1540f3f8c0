"""Stochastic tile assembly on a bounded square grid.

Tiles carry four edge labels; labels bond in fixed pairs (1-2, 3-4, ...),
label 0 is inert, and binding is irreversible at interaction strength 1.  The
seed tile is placed at the grid center and growth proceeds along the frontier
worklist until nothing more can bond or the structure reaches the border.

A tile set is classified from k redundant runs: trivial non-determinism (two
distinct placements possible at one frontier site) is flagged during a run,
unbounded growth when a tile lands on a border cell, and steric
non-determinism when independent runs disagree on the final shape hash.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .genome import TileSet

DEFAULT_GRID_DIM = 19


class AssemblyError(ValueError):
    """Invalid assembly input (grid dimension, mismatched grids, ...)."""


def bonds(i: int, j: int) -> bool:
    """True iff labels i and j bond (pairs 1-2, 3-4, ...; 0 bonds nothing)."""
    return i > 0 and j == ((i - 1) ^ 1) + 1


def _partner(label: int) -> int:
    return ((label - 1) ^ 1) + 1 if label > 0 else 0


@dataclass(frozen=True)
class BondingTable:
    """Per-label candidate lists: which (tile, orientation) pairs bond to a
    presented label.

    Entries are canonicalised so the bonding edge faces north (toward the
    label's owner); :meth:`entries_for` rotates them toward any direction.
    Orientations that repeat a tile's in-situ edge configuration are dropped,
    so rotationally symmetric tiles appear once per distinct configuration.
    """

    entries: tuple[tuple[tuple[int, int], ...], ...]  # [label] -> ((tile, orient), ...)

    def entries_for(self, label: int, facing: int = 0) -> tuple[tuple[int, int], ...]:
        """Candidates whose bonding edge faces ``facing`` (0=N,1=E,2=S,3=W)."""
        return tuple((t, (r + facing) & 3) for t, r in self.entries[label])

    def __getitem__(self, label: int) -> tuple[tuple[int, int], ...]:
        return self.entries[label]


def tile_edges_in_situ(tile: tuple[int, int, int, int], orientation: int) -> tuple[int, int, int, int]:
    """Edge labels (N, E, S, W) presented by a tile rotated clockwise by
    90 * orientation degrees."""
    return tuple(tile[(d - orientation) & 3] for d in range(4))


def build_bonding_table(t: TileSet, b: int) -> BondingTable:
    """Precompute, for every label, the placements that bond to it."""
    per_label: list[tuple[tuple[int, int], ...]] = []
    for label in range(b):
        p = _partner(label)
        found: list[tuple[int, int]] = []
        if 0 < p < b:
            for ti, tile in enumerate(t.tiles):
                seen: list[tuple[int, ...]] = []
                for r in range(4):
                    situ = tile_edges_in_situ(tile, r)
                    if situ[0] != p or situ in seen:
                        continue
                    seen.append(situ)
                    found.append((ti, r))
        per_label.append(tuple(found))
    return BondingTable(tuple(per_label))


class OutcomeKind(Enum):
    BOUNDED = "bounded"
    UNBOUND = "unbound"
    TRIVIAL_NONDET = "trivial_nondet"


class ClassKind(Enum):
    DETERMINISTIC = "deterministic"
    TRIVIAL_NONDET = "trivial_nondet"
    STERIC_NONDET = "steric_nondet"
    UNBOUND = "unbound"


_CLS_FROM_CODE = {
    _kernels.CLS_DETERMINISTIC: ClassKind.DETERMINISTIC,
    _kernels.CLS_TRIVIAL: ClassKind.TRIVIAL_NONDET,
    _kernels.CLS_STERIC: ClassKind.STERIC_NONDET,
    _kernels.CLS_UNBOUND: ClassKind.UNBOUND,
}


class AssemblyGrid:
    """A d x d board; each cell is empty or holds (tile index, orientation)."""

    __slots__ = ("d", "cells")

    def __init__(self, d: int, cells: np.ndarray | None = None):
        self.d = d
        if cells is None:
            cells = np.full((d, d), -1, np.int16)
        self.cells = cells.reshape(d, d)

    def cell(self, row: int, col: int):
        v = int(self.cells[row, col])
        return None if v < 0 else (v >> 2, v & 3)

    def occupancy(self) -> np.ndarray:
        return self.cells >= 0

    def occupied_count(self) -> int:
        return int((self.cells >= 0).sum())

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, AssemblyGrid)
            and self.d == other.d
            and bool(np.array_equal(self.cells, other.cells))
        )


@dataclass(frozen=True)
class AssemblyOutcome:
    kind: OutcomeKind
    grid: AssemblyGrid | None = None  # present iff BOUNDED


@dataclass(frozen=True)
class Classification:
    kind: ClassKind
    shape_hash: int | None = None  # present iff DETERMINISTIC
    shape: "object | None" = None  # CroppedShape iff DETERMINISTIC


def _edges_array(t: TileSet) -> tuple[np.ndarray, int]:
    a = len(t)
    labels = np.empty(a * 4, np.uint8)
    for ti, tile in enumerate(t.tiles):
        for e in range(4):
            if not 0 <= tile[e] < 256:
                raise AssemblyError(f"edge label {tile[e]} out of byte range")
            labels[ti * 4 + e] = tile[e]
    return _kernels.edges_from_labels(labels, a), a


def _check_dim(d: int) -> None:
    if d < 3 or d % 2 == 0:
        raise AssemblyError(f"grid dimension must be odd and >= 3, got {d}")


def assemble_once(t: TileSet, d: int = DEFAULT_GRID_DIM, seed: int = 0,
                  genome_index: int = 0, run_index: int = 0,
                  strict_contacts: bool = True) -> AssemblyOutcome:
    """One stochastic assembly; the random stream is derived from
    (seed, genome_index, run_index)."""
    _check_dim(d)
    edges, a = _edges_array(t)
    out_grid = np.empty(d * d, np.int16)
    outcome, *_ = _kernels.assemble_single(
        edges, a, d, np.uint64(seed), np.uint64(genome_index), run_index,
        strict_contacts, out_grid)
    if outcome == _kernels.RUN_OVERFLOW:
        raise RuntimeError("movelist capacity exceeded (internal error)")
    if outcome == _kernels.RUN_TRIVIAL:
        return AssemblyOutcome(OutcomeKind.TRIVIAL_NONDET)
    if outcome == _kernels.RUN_UNBOUND:
        return AssemblyOutcome(OutcomeKind.UNBOUND)
    return AssemblyOutcome(OutcomeKind.BOUNDED, AssemblyGrid(d, out_grid))


def classify_tileset(t: TileSet, d: int = DEFAULT_GRID_DIM, k: int = 8,
                     seed: int = 0, genome_index: int = 0,
                     strict_contacts: bool = True,
                     rotation_invariant: bool = False) -> Classification:
    """Classify a tile set from k redundant assembly runs.

    Precedence across runs: trivial non-determinism, then unbounded growth,
    then shape-hash agreement (all equal -> deterministic, else steric).
    ``rotation_invariant`` switches the steric comparison to
    rotation-invariant hashes (off by default to stay comparable with plain
    grid hashing).
    """
    from .classify import CroppedShape, rotation_invariant_hash, crop, shape_hash

    _check_dim(d)
    if k < 1:
        raise AssemblyError(f"redundancy k must be >= 1, got {k}")
    edges, a = _edges_array(t)
    if not rotation_invariant:
        shape_words = np.zeros((d * d + 63) // 64, np.uint64)
        status, cls, hsh, w, h, nc = _kernels.classify_single(
            edges, a, d, k, np.uint64(seed), np.uint64(genome_index),
            strict_contacts, shape_words)
        if status != 0:
            raise RuntimeError("movelist capacity exceeded (internal error)")
        kind = _CLS_FROM_CODE[int(cls)]
        if kind is not ClassKind.DETERMINISTIC:
            return Classification(kind)
        shape = CroppedShape.from_packed_words(int(w), int(h), shape_words)
        return Classification(kind, int(hsh), shape)

    # rotation-invariant comparison: plain per-run assemblies, hashes of the
    # sorted four rotations
    grids: list[AssemblyGrid] = []
    unbound = False
    for run in range(k):
        out = assemble_once(t, d, seed=seed, genome_index=genome_index,
                            run_index=run, strict_contacts=strict_contacts)
        if out.kind is OutcomeKind.TRIVIAL_NONDET:
            return Classification(ClassKind.TRIVIAL_NONDET)
        if out.kind is OutcomeKind.UNBOUND:
            unbound = True
            continue
        grids.append(out.grid)
    if unbound:
        return Classification(ClassKind.UNBOUND)
    shapes = [crop(g) for g in grids]
    hashes = [rotation_invariant_hash(s) for s in shapes]
    if len(set(hashes)) == 1:
        return Classification(ClassKind.DETERMINISTIC, hashes[0], shapes[0])
    return Classification(ClassKind.STERIC_NONDET)


def outcome_equivalent(a: AssemblyGrid, b: AssemblyGrid) -> bool:
    """Cell-wise equality of tile type and orientation (position-sensitive)."""
    if a.d != b.d:
        raise AssemblyError(f"grid dimensions differ: {a.d} vs {b.d}")
    return a == b
