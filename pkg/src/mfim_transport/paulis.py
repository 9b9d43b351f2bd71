"""Bit-mask Pauli-string algebra on the computational basis.

Conventions used throughout the package:

* site ``i`` of the chain (1-based) maps to bit ``i - 1`` of the basis
  index, and amplitudes are indexed little-endian, so basis state ``|b>``
  has site ``i`` in qubit state ``(b >> (i - 1)) & 1``;
* a :class:`PauliString` stores a Hermitian product of single-site
  X/Y/Z/I factors as two bit masks.  Bit ``j`` of ``x_mask`` marks an X
  or Y factor on site ``j + 1`` and bit ``j`` of ``z_mask`` a Z or Y
  factor.  The operator represented is
  ``coeff * i**popcount(x_mask & z_mask) * X^x Z^z``,
  which is Hermitian for real ``coeff``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class PauliString:
    """One weighted Hermitian Pauli product in bit-mask form."""

    x_mask: int
    z_mask: int
    coeff: float = 1.0

    @property
    def phase(self) -> complex:
        """Internal phase making X^x Z^z Hermitian (i per Y factor)."""
        return 1j ** ((self.x_mask & self.z_mask).bit_count() % 4)

    def support(self) -> int:
        return self.x_mask | self.z_mask

    def sites(self) -> list[int]:
        """1-based sites the string acts on non-trivially."""
        mask = self.support()
        return [j + 1 for j in range(mask.bit_length()) if (mask >> j) & 1]

    def scaled(self, factor: float) -> "PauliString":
        return replace(self, coeff=self.coeff * factor)

    def label(self, num_sites: int) -> str:
        """Site-ordered label, site 1 first (e.g. ``'XIZZ'``)."""
        letters = []
        for j in range(num_sites):
            x = (self.x_mask >> j) & 1
            z = (self.z_mask >> j) & 1
            letters.append("IXZY"[x + 2 * z])
        return "".join(letters)


def x_at(site: int) -> PauliString:
    return PauliString(1 << (site - 1), 0)


def y_at(site: int) -> PauliString:
    return PauliString(1 << (site - 1), 1 << (site - 1))


def z_at(site: int) -> PauliString:
    return PauliString(0, 1 << (site - 1))


def zz_at(site: int) -> PauliString:
    """Z on ``site`` and ``site + 1``."""
    return PauliString(0, (1 << (site - 1)) | (1 << site))


def from_label(label: str, coeff: float = 1.0) -> PauliString:
    x_mask = z_mask = 0
    for j, letter in enumerate(label):
        if letter in "XY":
            x_mask |= 1 << j
        if letter in "ZY":
            z_mask |= 1 << j
        if letter not in "IXYZ":
            raise ValueError(f"unknown Pauli letter {letter!r}")
    return PauliString(x_mask, z_mask, coeff)


@lru_cache(maxsize=256)
def _z_signs(num_sites: int, z_mask: int) -> np.ndarray:
    """(-1)**popcount(b & z_mask) over all basis indices b, read-only."""
    b = np.arange(1 << num_sites, dtype=np.uint64)
    signs = 1.0 - 2.0 * (np.bitwise_count(b & np.uint64(z_mask)) & 1)
    signs.flags.writeable = False
    return signs


@lru_cache(maxsize=256)
def _xor_index(num_sites: int, x_mask: int) -> np.ndarray:
    idx = np.arange(1 << num_sites, dtype=np.intp) ^ x_mask
    idx.flags.writeable = False
    return idx


def apply_pauli(p: PauliString, psi: np.ndarray, num_sites: int) -> np.ndarray:
    """Apply the string to a state vector (or to each column of a matrix)."""
    signs = _z_signs(num_sites, p.z_mask)
    if psi.ndim == 1:
        scaled = (p.coeff * p.phase) * signs * psi
    else:
        scaled = (p.coeff * p.phase) * signs[:, None] * psi
    if p.x_mask == 0:
        return scaled
    out = np.empty_like(scaled)
    out[_xor_index(num_sites, p.x_mask)] = scaled
    return out


def apply_terms(terms: list[PauliString], psi: np.ndarray, num_sites: int) -> np.ndarray:
    out = apply_pauli(terms[0], psi, num_sites)
    for term in terms[1:]:
        out += apply_pauli(term, psi, num_sites)
    return out


def expectation_state(p: PauliString, psi: np.ndarray, num_sites: int) -> float:
    """<psi|P|psi>, real for the Hermitian strings stored here."""
    return complex(np.vdot(psi, apply_pauli(p, psi, num_sites))).real


def matrix_element(p: PauliString, bra: np.ndarray, ket: np.ndarray, num_sites: int) -> complex:
    return complex(np.vdot(bra, apply_pauli(p, ket, num_sites)))


def expectation_dm(p: PauliString, rho: np.ndarray, num_sites: int) -> float:
    """tr(rho P) via a single shifted-diagonal gather."""
    d = 1 << num_sites
    cols = np.arange(d, dtype=np.intp) ^ p.x_mask
    signs = _z_signs(num_sites, p.z_mask)
    # (rho P)_{cc} = rho[c, c ^ x] * phase * sign(c)
    val = np.sum(rho[np.arange(d), cols] * signs) * p.coeff * p.phase
    return complex(val).real


def dense(p: PauliString, num_sites: int) -> np.ndarray:
    d = 1 << num_sites
    mat = np.zeros((d, d), dtype=complex)
    rows = _xor_index(num_sites, p.x_mask)
    mat[rows, np.arange(d)] = p.coeff * p.phase * _z_signs(num_sites, p.z_mask)
    return mat


def dense_sum(terms: list[PauliString], num_sites: int) -> np.ndarray:
    mat = dense(terms[0], num_sites)
    for term in terms[1:]:
        mat += dense(term, num_sites)
    return mat


def merge_terms(terms: list[PauliString]) -> list[PauliString]:
    """Combine strings with equal masks; drop exact zeros."""
    acc: dict[tuple[int, int], float] = {}
    for term in terms:
        key = (term.x_mask, term.z_mask)
        acc[key] = acc.get(key, 0.0) + term.coeff
    return [PauliString(x, z, c) for (x, z), c in acc.items() if c != 0.0]


def infinite_temperature_product(a: list[PauliString], b: list[PauliString]) -> float:
    """tr(A B) / d for two Hermitian string sums.

    Pauli orthogonality leaves only mask-matched pairs, each contributing
    the plain product of the two coefficients.
    """
    index = {}
    for term in a:
        key = (term.x_mask, term.z_mask)
        index[key] = index.get(key, 0.0) + term.coeff
    total = 0.0
    for term in b:
        total += index.get((term.x_mask, term.z_mask), 0.0) * term.coeff
    return total
