"""Two-species bosonic Fock bases on a lattice.

Every lattice site ``k`` carries two modes, ``a_k`` and ``b_k``.  Occupation
vectors are laid out as ``(n_a0, n_b0, n_a1, n_b1, ...)`` and the basis holds
every vector with a fixed total number of atoms.  States are sorted in
descending lexicographic order, so the first state of a one-site basis is
``|N a>`` and the last one ``|N b>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, sqrt
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse

DEFAULT_MAX_STATES = 10**6

SPECIES = ("a", "b")


class BasisSizeError(ValueError):
    """Raised when a requested basis would exceed the dimension cap."""


def basis_size(sites: int, total_atoms: int) -> int:
    """Number of ways to put ``total_atoms`` bosons in ``2 * sites`` modes."""
    modes = 2 * sites
    return comb(total_atoms + modes - 1, modes - 1)


def _compositions(total: int, modes: int) -> Iterator[tuple[int, ...]]:
    # descending lexicographic order
    if modes == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, modes - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class FockBasis:
    """Fixed-N occupation-number basis.

    Attributes
    ----------
    sites : int
        Number of lattice sites ``L``.
    total_atoms : int
        Total atom number ``N`` shared by every state.
    states : ndarray of int, shape (dim, 2 * sites)
        Occupation vectors, one per row.
    """

    sites: int
    total_atoms: int
    states: np.ndarray = field(repr=False)
    _lookup: dict = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def modes(self) -> int:
        return 2 * self.sites

    def __len__(self) -> int:
        return self.dim

    def index(self, state: Sequence[int]) -> int:
        """Basis index of an occupation vector (``KeyError`` if absent)."""
        return self._lookup[tuple(int(x) for x in state)]

    def state(self, k: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.states[k])

    def __contains__(self, state) -> bool:
        return tuple(int(x) for x in state) in self._lookup

    def site_totals(self) -> np.ndarray:
        """Per-site atom counts, shape (dim, sites)."""
        return self.states[:, 0::2] + self.states[:, 1::2]


def mode(site: int, species: str) -> int:
    """Column index of mode ``species`` on ``site``."""
    return 2 * site + SPECIES.index(species)


def build_basis(sites: int, total_atoms: int, max_states: int = DEFAULT_MAX_STATES) -> FockBasis:
    """Enumerate all distributions of ``total_atoms`` over ``2 * sites`` modes.

    Raises
    ------
    BasisSizeError
        If the basis would hold more than ``max_states`` states.
    """
    if sites < 1:
        raise ValueError(f"need at least one site, got {sites}")
    if total_atoms < 0:
        raise ValueError(f"atom number must be non-negative, got {total_atoms}")
    size = basis_size(sites, total_atoms)
    if size > max_states:
        raise BasisSizeError(
            f"{sites} sites with {total_atoms} atoms gives {size} states (cap {max_states})"
        )
    states = np.array(list(_compositions(total_atoms, 2 * sites)), dtype=np.int64)
    states = states.reshape(size, 2 * sites)
    lookup = {tuple(int(x) for x in row): k for k, row in enumerate(states)}
    return FockBasis(sites, total_atoms, states, lookup)


@dataclass(frozen=True)
class LadderMatrix:
    """A single creation/annihilation operator between two bases.

    ``truncated`` is True when some image state was dropped because it is not
    in the target basis.
    """

    matrix: sparse.coo_array
    source: FockBasis
    target: FockBasis
    truncated: bool


def ladder_matrix(basis: FockBasis, mode_index: int, kind: str,
                  target: FockBasis | None = None) -> LadderMatrix:
    """Matrix of ``a^dagger`` (``kind='raise'``) or ``a`` (``'lower'``) on one mode.

    A single ladder operator changes the atom number, so by default the
    target is the basis with ``N +/- 1`` atoms.  Passing ``target=basis``
    restricts the operator to pairs of states inside the fixed-N basis; every
    image then falls outside it and the result is flagged as truncated.
    """
    if not 0 <= mode_index < basis.modes:
        raise ValueError(f"mode {mode_index} out of range for {basis.modes} modes")
    if kind not in ("raise", "lower"):
        raise ValueError(f"kind must be 'raise' or 'lower', got {kind!r}")
    step = 1 if kind == "raise" else -1
    if target is None:
        n_target = basis.total_atoms + step
        if n_target < 0:
            # lowering the vacuum: nothing survives
            target = build_basis(basis.sites, 0)
            return LadderMatrix(sparse.coo_array((target.dim, basis.dim)), basis, target, False)
        target = build_basis(basis.sites, n_target)
    if target.sites != basis.sites:
        raise ValueError("source and target bases live on different lattices")

    rows, cols, vals = [], [], []
    truncated = False
    for k, occ in enumerate(basis.states):
        n = int(occ[mode_index])
        if kind == "lower" and n == 0:
            continue
        amp = sqrt(n + 1) if kind == "raise" else sqrt(n)
        image = occ.copy()
        image[mode_index] += step
        key = tuple(int(x) for x in image)
        j = target._lookup.get(key)
        if j is None:
            truncated = True
            continue
        rows.append(j)
        cols.append(k)
        vals.append(amp)
    mat = sparse.coo_array((vals, (rows, cols)), shape=(target.dim, basis.dim))
    return LadderMatrix(mat, basis, target, truncated)


def normal_ordered(basis: FockBasis, creators: Sequence[int], annihilators: Sequence[int]) -> sparse.coo_array:
    """Matrix of ``c^dag_{i1} c^dag_{i2}... c_{j1} c_{j2}...`` inside a fixed-N basis.

    The product must conserve atom number (same count of creators and
    annihilators).  Annihilators act right to left, then creators.
    """
    if len(creators) != len(annihilators):
        raise ValueError("operator product does not conserve atom number")
    rows, cols, vals = [], [], []
    for k, occ in enumerate(basis.states):
        image = occ.copy()
        amp = 1.0
        for m in reversed(annihilators):
            if image[m] == 0:
                amp = 0.0
                break
            amp *= sqrt(image[m])
            image[m] -= 1
        if amp == 0.0:
            continue
        for m in reversed(creators):
            image[m] += 1
            amp *= sqrt(image[m])
        rows.append(basis._lookup[tuple(int(x) for x in image)])
        cols.append(k)
        vals.append(amp)
    return sparse.coo_array((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def number_operator(basis: FockBasis, mode_index: int) -> np.ndarray:
    """Diagonal of ``n`` on one mode."""
    return basis.states[:, mode_index].astype(float)


@dataclass(frozen=True)
class SectorSpec:
    """Computation space for fixed per-site atom numbers.

    Qubit ``i`` reads 0 when site ``i`` holds only ``a`` atoms and 1 when
    exactly one of its atoms is in ``b``.
    """

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(n) for n in self.occupations)
        if any(n < 1 for n in occ):
            raise ValueError(f"every site needs at least one atom, got {occ}")
        object.__setattr__(self, "occupations", occ)

    @property
    def sites(self) -> int:
        return len(self.occupations)

    @property
    def total_atoms(self) -> int:
        return sum(self.occupations)

    @property
    def dim(self) -> int:
        return 2 ** self.sites

    def labels(self) -> list[tuple[int, ...]]:
        """Qubit labels ``(z_1, ..., z_L)`` in binary order, site 1 most significant."""
        L = self.sites
        return [tuple((z >> (L - 1 - i)) & 1 for i in range(L)) for z in range(2**L)]

    def state(self, label: Sequence[int]) -> tuple[int, ...]:
        occ = []
        for n, z in zip(self.occupations, label):
            occ.extend((n - z, z))
        return tuple(occ)


def sector_indices(basis: FockBasis, spec: SectorSpec) -> list[int]:
    """Basis indices of the computation states, ordered by ``(z_1 ... z_L)``."""
    if spec.sites != basis.sites:
        raise ValueError(f"sector has {spec.sites} sites, basis has {basis.sites}")
    if spec.total_atoms != basis.total_atoms:
        raise ValueError(
            f"sector holds {spec.total_atoms} atoms, basis holds {basis.total_atoms}"
        )
    out = []
    for label in spec.labels():
        occ = spec.state(label)
        try:
            out.append(basis.index(occ))
        except KeyError:
            raise ValueError(f"sector state {occ} missing from basis") from None
    return out


def configuration_indices(basis: FockBasis, occupations: Sequence[int]) -> list[int]:
    """All basis states with the given per-site atom numbers (any a/b split)."""
    occ = np.asarray(occupations)
    mask = np.all(basis.site_totals() == occ, axis=1)
    return [int(k) for k in np.flatnonzero(mask)]
