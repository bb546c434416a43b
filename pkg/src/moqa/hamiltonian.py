"""Diagonal Hamiltonians as weighted sums of Pauli-Z strings.

A term is identified by an integer mask ``x``: bit ``k`` set means ``Z_k``
acts in that term. The value of the Hamiltonian at a sign vector ``s`` is
``sum_x C(x) * prod_{k in x} s_k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from ._validation import check_spins
from .exceptions import ResourceBudgetError, ValidationError
from .qubo import bits_to_index, spins_to_bits

LANDSCAPE_MAX_N = 24


def popcount(x):
    return np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)


def walsh_hadamard(values):
    """Unnormalized fast Walsh-Hadamard transform of a length ``2**n`` vector.

    ``out[b] = sum_x values[x] * (-1)**popcount(b & x)``. The transform is its
    own inverse up to a factor ``2**n``.
    """
    v = np.array(values, dtype=np.float64)
    N = v.shape[0]
    if N & (N - 1):
        raise ValidationError("length must be a power of two")
    h = 1
    while h < N:
        v = v.reshape(-1, 2, h)
        v = np.concatenate([v[:, 0] + v[:, 1], v[:, 0] - v[:, 1]], axis=1)
        h *= 2
    return v.reshape(N)


def mask_to_bits(mask, n):
    """Qubit-ordered bit string: character ``k`` is bit ``k`` of ``mask``."""
    return "".join("1" if (mask >> k) & 1 else "0" for k in range(n))


def bits_to_mask(bits):
    return sum(1 << k for k, ch in enumerate(bits) if ch == "1")


def _canonical_order(masks, coefficients):
    masks = np.asarray(masks, dtype=np.int64)
    coefficients = np.asarray(coefficients, dtype=np.float64)
    order = np.lexsort((masks, popcount(masks)))
    return masks[order], coefficients[order]


@dataclass(frozen=True, eq=False)
class SparsePauliHamiltonian:
    """Map from Pauli-Z mask to real coefficient.

    Terms are kept sorted by (Hamming weight, mask value) with no duplicate
    masks and no zero coefficients.

    Attributes
    ----------
    n : int
        Number of qubits / variables.
    p : int
        Approximation level the Hamiltonian was built for.
    masks, coefficients : ndarray
        Parallel arrays holding the terms.
    provenance : str
        ``"dense"``, ``"sparse"``, ``"symmetry"`` or ``"thresholded(θ)"``.
    M : int
        Number of objectives combined.
    shift_c : float
        Positivity shift that was applied to the objectives.
    info : mapping
        Free-form counters (allocations evaluated, truncation bound, ...).
    """

    n: int
    p: int
    masks: np.ndarray
    coefficients: np.ndarray
    provenance: str = "dense"
    M: int = 1
    shift_c: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        masks, coefs = _canonical_order(self.masks, self.coefficients)
        if masks.shape != coefs.shape or masks.ndim != 1:
            raise ValidationError("masks and coefficients must be 1-D arrays of equal length")
        if masks.size and (masks.min() < 0 or masks.max() >= (1 << self.n)):
            raise ValidationError("mask out of range for n qubits")
        if np.unique(masks).size != masks.size:
            raise ValidationError("duplicate masks")
        keep = coefs != 0.0
        masks, coefs = masks[keep], coefs[keep]
        masks.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "info", MappingProxyType(dict(self.info)))

    @classmethod
    def from_terms(cls, n, p, terms, **kwargs):
        """Build from a ``{mask: coefficient}`` mapping."""
        masks = np.fromiter(terms.keys(), dtype=np.int64, count=len(terms))
        coefs = np.fromiter(terms.values(), dtype=np.float64, count=len(terms))
        return cls(n, p, masks, coefs, **kwargs)

    @property
    def terms(self):
        return dict(zip(self.masks.tolist(), self.coefficients.tolist()))

    def __len__(self):
        return int(self.masks.size)

    def __getitem__(self, mask):
        i = np.nonzero(self.masks == mask)[0]
        return float(self.coefficients[i[0]]) if i.size else 0.0

    @property
    def weights(self):
        return popcount(self.masks)

    @property
    def max_weight(self):
        return int(self.weights.max()) if len(self) else 0

    def evaluate(self, s):
        """Energy at a sign vector or at each row of a batch of sign vectors."""
        s = check_spins(s, self.n)
        single = s.ndim == 1
        idx = bits_to_index(spins_to_bits(np.atleast_2d(s)))
        out = np.empty(idx.shape[0])
        step = max(1, (1 << 22) // max(1, len(self)))
        for start in range(0, idx.shape[0], step):
            block = idx[start:start + step, None] & self.masks[None, :]
            signs = 1.0 - 2.0 * (popcount(block) & 1)
            out[start:start + step] = signs @ self.coefficients
        return float(out[0]) if single else out

    def to_dense(self, max_n=LANDSCAPE_MAX_N):
        if self.n > max_n:
            raise ResourceBudgetError(f"dense coefficient vector for n={self.n} exceeds cap {max_n}")
        C = np.zeros(1 << self.n)
        C[self.masks] = self.coefficients
        return C

    def landscape(self, max_n=LANDSCAPE_MAX_N):
        """Energies at all ``2**n`` bitstrings (little-endian index order)."""
        return walsh_hadamard(self.to_dense(max_n))

    def with_provenance(self, provenance, **info):
        return SparsePauliHamiltonian(
            self.n, self.p, self.masks, self.coefficients, provenance, self.M, self.shift_c,
            {**self.info, **info},
        )

    def allclose(self, other, rtol=1e-12, atol=0.0):
        """Same mask set and coefficients within tolerance."""
        return (
            self.n == other.n
            and np.array_equal(self.masks, other.masks)
            and np.allclose(self.coefficients, other.coefficients, rtol=rtol, atol=atol)
        )

    # JSON-lines hand-off format

    def header(self):
        return {
            "n": self.n,
            "p": self.p,
            "M": self.M,
            "shift_c": self.shift_c,
            "provenance": self.provenance,
            "num_terms": len(self),
        }

    def iter_records(self):
        width = max(1, (self.n + 3) // 4)
        for mask, coef in zip(self.masks.tolist(), self.coefficients.tolist()):
            yield {
                "mask_hex": f"0x{mask:0{width}x}",
                "mask_bits": mask_to_bits(mask, self.n),
                "weight": int(mask).bit_count(),
                "coefficient": coef,
            }

    def to_jsonl(self, fp):
        fp.write(json.dumps(self.header()) + "\n")
        for rec in self.iter_records():
            fp.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, fp):
        lines = [line for line in fp if line.strip()]
        if not lines:
            raise ValidationError("empty Hamiltonian file")
        head = json.loads(lines[0])
        for key in ("n", "p"):
            if key not in head:
                raise ValidationError(f"header is missing {key!r}")
        terms = {}
        for line in lines[1:]:
            rec = json.loads(line)
            mask = int(rec["mask_hex"], 16)
            if "mask_bits" in rec and bits_to_mask(rec["mask_bits"]) != mask:
                raise ValidationError(f"mask_hex and mask_bits disagree in {rec}")
            terms[mask] = float(rec["coefficient"])
        return cls.from_terms(
            int(head["n"]), int(head["p"]), terms,
            provenance=head.get("provenance", "dense"),
            M=int(head.get("M", 1)),
            shift_c=float(head.get("shift_c", 0.0)),
        )
