"""Sparse Pauli-sum operators and support sets for the diagonalization cost.

A PauliSum stores A = sum_P c_P P as {PauliString: complex}. Traces follow the
unnormalized convention tr(A P) = 2^n c_P.

build_support_sets precomputes, for a Hamiltonian H and an ansatz list
(P_1..P_d), everything the cost evaluator needs:

* g1: the off-diagonal strings that can appear in K'HK (ansatz closure),
* g2: the non-identity products P_i P_j with their (j, j_P, c) index tables,
* flat integer/phase tables that let the hot loops run as numpy gathers and
  bincount accumulations instead of per-term dict arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliString, multiply, parse

PRUNE_TOL = 1e-14
HERMITIAN_TOL = 1e-12


class PauliSum:
    """Sparse complex combination of Pauli strings on a fixed qubit count."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms=None):
        self.n = n
        acc: dict[PauliString, complex] = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, dict) else terms
            for p, c in items:
                if p.n != n:
                    raise ValueError(f"term on {p.n} qubits in a {n}-qubit sum")
                c = complex(c)
                if p in acc:
                    acc[p] += c
                else:
                    acc[p] = c
        self._terms = {p: c for p, c in acc.items() if abs(c) >= PRUNE_TOL}

    @classmethod
    def zero(cls, n: int) -> "PauliSum":
        return cls(n)

    @classmethod
    def identity(cls, n: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n, [(PauliString.identity(n), coeff)])

    @classmethod
    def from_words(cls, terms: dict[str, complex]) -> "PauliSum":
        words = list(terms)
        if not words:
            raise ValueError("cannot infer qubit count from an empty term map")
        n = len(words[0])
        return cls(n, [(parse(w, n), c) for w, c in terms.items()])

    def items(self):
        return self._terms.items()

    def strings(self):
        return self._terms.keys()

    def coefficient(self, p: PauliString) -> complex:
        return self._terms.get(p, 0j)

    def __len__(self) -> int:
        return len(self._terms)

    def __contains__(self, p: PauliString) -> bool:
        return p in self._terms

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PauliSum)
            and self.n == other.n
            and self._terms == other._terms
        )

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n != other.n:
            raise ValueError(f"qubit counts differ: {self.n} vs {other.n}")
        acc = dict(self._terms)
        for p, c in other._terms.items():
            acc[p] = acc.get(p, 0j) + c
        return PauliSum(self.n, acc)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "PauliSum":
        scalar = complex(scalar)
        return PauliSum(self.n, {p: c * scalar for p, c in self._terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "PauliSum":
        """Hermitian conjugate; strings are self-adjoint so only coefficients flip."""
        return PauliSum(self.n, {p: c.conjugate() for p, c in self._terms.items()})

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def __repr__(self) -> str:
        return f"PauliSum(n={self.n}, terms={len(self._terms)})"


def sum_multiply(a: PauliSum, b: PauliSum) -> PauliSum:
    """Operator product a*b, merged and pruned. O(len(a)*len(b)) term products."""
    if a.n != b.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {b.n}")
    acc: dict[PauliString, complex] = {}
    for pa, ca in a.items():
        for pb, cb in b.items():
            ph, s = multiply(pa, pb)
            acc[s] = acc.get(s, 0j) + ca * cb * ph.value
    return PauliSum(a.n, acc)


def conjugate(h: PauliSum, k: PauliSum) -> PauliSum:
    """k_adjoint * h * k."""
    return sum_multiply(k.adjoint(), sum_multiply(h, k))


def trace_with(a: PauliSum, p: PauliString) -> complex:
    """tr(A P) = 2^n * coefficient of P in A."""
    if a.n != p.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {p.n}")
    return (2**a.n) * a.coefficient(p)


# --- Hamiltonian text files -------------------------------------------------
#
# One term per line: "<real coefficient> <pauli word>". '#' starts a comment,
# blank lines are skipped, duplicate words merge.


def load_hamiltonian(path) -> PauliSum:
    terms: dict[PauliString, complex] = {}
    n = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ValueError(
                    f"{path}: line {lineno}: expected '<coefficient> <word>', got {raw.strip()!r}"
                )
            try:
                coeff = float(fields[0])
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: bad coefficient {fields[0]!r}"
                ) from None
            try:
                p = parse(fields[1], n)
            except ValueError as e:
                raise ValueError(f"{path}: line {lineno}: {e}") from None
            n = p.n
            terms[p] = terms.get(p, 0j) + coeff
    if n is None:
        raise ValueError(f"{path}: no terms found")
    return PauliSum(n, terms)


def save_hamiltonian(path, h: PauliSum) -> None:
    lines = []
    for p, c in sorted(h.items()):
        if abs(c.imag) > HERMITIAN_TOL:
            raise ValueError(f"non-real coefficient {c} on {p.word}")
        lines.append(f"{c.real!r} {p.word}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# --- support sets -----------------------------------------------------------


def _accumulate(tgt: np.ndarray, weights: np.ndarray, length: int) -> np.ndarray:
    """Complex bincount: sum weights into slots tgt of a length-`length` vector."""
    re = np.bincount(tgt, weights=weights.real, minlength=length)
    im = np.bincount(tgt, weights=weights.imag, minlength=length)
    return re + 1j * im


@dataclass(eq=False)
class SupportSets:
    """Closure data for a fixed (H, ansatz) pair. Identity semantics: two
    builds from equal inputs are distinct objects (the field arrays do not
    define a useful equality, and evaluators key caches by instance).

    g1 holds the off-diagonal strings of the conjugation closure
    {strip(P_a Q_i P_b)}; the coefficient of any string outside the closure is
    identically zero in K'HK, whatever the parameters. g2 holds the
    non-identity pair products P_i P_j; g2_pairs[P] lists (j, j_P, c) with
    P_{j_P} P_j = c P, which is exactly the index structure behind phi_P.
    """

    n: int
    ansatz: tuple[PauliString, ...]
    g1: tuple[PauliString, ...]
    g2: tuple[PauliString, ...]
    g2_pairs: dict[PauliString, tuple[tuple[int, int, complex], ...]]
    closure: tuple[PauliString, ...]

    # fixed Hamiltonian data
    h_ref: PauliSum = field(repr=False)
    h_strings: tuple[PauliString, ...] = field(repr=False)
    h_coeffs: np.ndarray = field(repr=False)

    # H*K product support; the last slot is a zero sentinel for lookups that
    # fall outside the support
    hk_strings: tuple[PauliString, ...] = field(repr=False)

    # flat build tables (entry arrays)
    hk_src_h: np.ndarray = field(repr=False)
    hk_src_k: np.ndarray = field(repr=False)
    hk_phase: np.ndarray = field(repr=False)
    hk_tgt: np.ndarray = field(repr=False)
    khk_src_a: np.ndarray = field(repr=False)
    khk_src_s: np.ndarray = field(repr=False)
    khk_phase: np.ndarray = field(repr=False)
    khk_tgt: np.ndarray = field(repr=False)

    # gradient lookup tables, shape (|g1|, d)
    grad_tgt: np.ndarray = field(repr=False)
    grad_phase: np.ndarray = field(repr=False)

    # phi entry tables
    phi_p: np.ndarray = field(repr=False)
    phi_j: np.ndarray = field(repr=False)
    phi_jp: np.ndarray = field(repr=False)
    phi_phase: np.ndarray = field(repr=False)

    # index of each g1 string inside closure, and the diagonal complement
    g1_closure_idx: np.ndarray = field(repr=False)
    diag_closure_idx: np.ndarray = field(repr=False)

    # per-parameter entry groupings used by the incremental optimizer caches
    hk_entries_by_k: list = field(repr=False)
    khk_entries_by_a: list = field(repr=False)
    khk_entries_by_s: list = field(repr=False)
    phi_entries_by_j: list = field(repr=False)

    @property
    def d(self) -> int:
        return len(self.ansatz)

    @property
    def dim(self) -> int:
        return 2**self.n

    def k_coeffs(self, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return r * np.exp(1j * theta)

    def hk_vector(self, k_coeffs: np.ndarray) -> np.ndarray:
        """Coefficients of H*K over hk_strings, sentinel zero appended."""
        w = self.h_coeffs[self.hk_src_h] * k_coeffs[self.hk_src_k] * self.hk_phase
        vec = _accumulate(self.hk_tgt, w, len(self.hk_strings))
        return np.append(vec, 0j)

    def khk_vector(self, k_coeffs: np.ndarray, hk_vec: np.ndarray) -> np.ndarray:
        """Coefficients of K'(HK) over closure."""
        w = (
            k_coeffs.conj()[self.khk_src_a]
            * hk_vec[self.khk_src_s]
            * self.khk_phase
        )
        return _accumulate(self.khk_tgt, w, len(self.closure))

    def phi_vector(self, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """phi_P over g2 (identity excluded; its value is ||r||^2)."""
        w = (
            self.phi_phase
            * r[self.phi_j]
            * r[self.phi_jp]
            * np.exp(1j * (theta[self.phi_j] - theta[self.phi_jp]))
        )
        return _accumulate(self.phi_p, w, len(self.g2))


def build_support_sets(h: PauliSum, ansatz) -> SupportSets:
    """Precompute closure strings and flat evaluation tables for (h, ansatz)."""
    ansatz = tuple(ansatz)
    if len(h) == 0:
        raise ValueError("empty Hamiltonian")
    if not ansatz:
        raise ValueError("empty ansatz")
    n = h.n
    for p in ansatz:
        if p.n != n:
            raise ValueError(f"ansatz string on {p.n} qubits, Hamiltonian on {n}")
    if len(set(ansatz)) != len(ansatz):
        raise ValueError("ansatz strings must be distinct")

    d = len(ansatz)
    h_strings = tuple(sorted(h.strings()))
    h_coeffs = np.array([h.coefficient(p) for p in h_strings], dtype=complex)

    # H*K support and its build table
    hk_index: dict[PauliString, int] = {}
    hk_rows = []
    for i, q in enumerate(h_strings):
        for b, pb in enumerate(ansatz):
            ph, s = multiply(q, pb)
            idx = hk_index.setdefault(s, len(hk_index))
            hk_rows.append((i, b, ph.value, idx))
    hk_strings = tuple(hk_index)  # insertion order matches indices
    hk_src_h, hk_src_k, hk_phase, hk_tgt = _to_arrays(hk_rows)

    # closure = strings of K'(HK), and its build table
    closure_index: dict[PauliString, int] = {}
    khk_rows = []
    for a, pa in enumerate(ansatz):
        for s_idx, s in enumerate(hk_strings):
            ph, t = multiply(pa, s)
            idx = closure_index.setdefault(t, len(closure_index))
            khk_rows.append((a, s_idx, ph.value, idx))
    closure = tuple(closure_index)
    khk_src_a, khk_src_s, khk_phase, khk_tgt = _to_arrays(khk_rows)

    g1 = tuple(sorted(p for p in closure if not p.is_diagonal))
    g1_closure_idx = np.array([closure_index[p] for p in g1], dtype=np.intp)
    diag_closure_idx = np.array(
        [i for i, p in enumerate(closure) if p.is_diagonal], dtype=np.intp
    )

    # gradient lookup: for each (P in g1, j) the string P*P_j inside hk support
    sentinel = len(hk_strings)
    grad_tgt = np.empty((len(g1), d), dtype=np.intp)
    grad_phase = np.empty((len(g1), d), dtype=complex)
    for p_idx, p in enumerate(g1):
        for j, pj in enumerate(ansatz):
            ph, rr = multiply(p, pj)
            grad_tgt[p_idx, j] = hk_index.get(rr, sentinel)
            grad_phase[p_idx, j] = ph.value

    # pair products P_i P_j -> phi index tables
    pair_map: dict[PauliString, list[tuple[int, int, complex]]] = {}
    for i, pi in enumerate(ansatz):
        for j, pj in enumerate(ansatz):
            ph, p = multiply(pi, pj)
            if p.is_identity:
                continue
            pair_map.setdefault(p, []).append((j, i, ph.value))
    g2 = tuple(sorted(pair_map))
    g2_pairs = {p: tuple(pair_map[p]) for p in g2}
    phi_rows = []
    for p_idx, p in enumerate(g2):
        for j, jp, c in g2_pairs[p]:
            phi_rows.append((p_idx, j, jp, c))
    if phi_rows:
        phi_p = np.array([r[0] for r in phi_rows], dtype=np.intp)
        phi_j = np.array([r[1] for r in phi_rows], dtype=np.intp)
        phi_jp = np.array([r[2] for r in phi_rows], dtype=np.intp)
        phi_phase = np.array([r[3] for r in phi_rows], dtype=complex)
    else:
        phi_p = phi_j = phi_jp = np.empty(0, dtype=np.intp)
        phi_phase = np.empty(0, dtype=complex)

    def group(by: np.ndarray, count: int) -> list:
        order = np.argsort(by, kind="stable")
        bounds = np.searchsorted(by[order], np.arange(count + 1))
        return [order[bounds[i] : bounds[i + 1]] for i in range(count)]

    hk_entries_by_k = group(hk_src_k, d)
    khk_entries_by_a = group(khk_src_a, d)
    khk_entries_by_s = group(khk_src_s, len(hk_strings))
    both = np.concatenate([phi_j, phi_jp])
    entry_ids = np.concatenate([np.arange(len(phi_j))] * 2) if len(phi_j) else both
    phi_entries_by_j = [
        np.unique(entry_ids[both == j]) if len(phi_j) else np.empty(0, dtype=np.intp)
        for j in range(d)
    ]

    return SupportSets(
        n=n,
        ansatz=ansatz,
        g1=g1,
        g2=g2,
        g2_pairs=g2_pairs,
        closure=closure,
        h_ref=h,
        h_strings=h_strings,
        h_coeffs=h_coeffs,
        hk_strings=hk_strings,
        hk_src_h=hk_src_h,
        hk_src_k=hk_src_k,
        hk_phase=hk_phase,
        hk_tgt=hk_tgt,
        khk_src_a=khk_src_a,
        khk_src_s=khk_src_s,
        khk_phase=khk_phase,
        khk_tgt=khk_tgt,
        grad_tgt=grad_tgt,
        grad_phase=grad_phase,
        phi_p=phi_p,
        phi_j=phi_j,
        phi_jp=phi_jp,
        phi_phase=phi_phase,
        g1_closure_idx=g1_closure_idx,
        diag_closure_idx=diag_closure_idx,
        hk_entries_by_k=hk_entries_by_k,
        khk_entries_by_a=khk_entries_by_a,
        khk_entries_by_s=khk_entries_by_s,
        phi_entries_by_j=phi_entries_by_j,
    )


def _to_arrays(rows):
    a = np.array([r[0] for r in rows], dtype=np.intp)
    b = np.array([r[1] for r in rows], dtype=np.intp)
    ph = np.array([r[2] for r in rows], dtype=complex)
    tgt = np.array([r[3] for r in rows], dtype=np.intp)
    return a, b, ph, tgt
