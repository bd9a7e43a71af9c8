"""Dense-matrix ground truth: error reports, a posteriori bounds, eigenspace
projector distances, and Lie-closure dimension counting.

Everything here is exact linear algebra on 2^n x 2^n matrices and is meant
for small n. The Pauli-algebra modules never import this one, so the dense
route stays an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .cost import KParams, eval_F, k_as_sum
from .operators import PauliSum, build_support_sets
from .pauli import PauliString, commutes, multiply

DENSE_MAX_QUBITS = 12


class DenseLimitError(ValueError):
    """Raised when an operator is too large for the dense verification path."""


def _check_dense_n(n: int) -> None:
    if n > DENSE_MAX_QUBITS:
        raise DenseLimitError(
            f"dense path supports at most {DENSE_MAX_QUBITS} qubits, got {n}"
        )


def _revbits(mask: int, n: int) -> int:
    """Map a qubit-indexed mask to a dense-index mask.

    Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of
    a computational-basis index.
    """
    out = 0
    for q in range(n):
        if mask >> q & 1:
            out |= 1 << (n - 1 - q)
    return out


def _parity(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return v & 1


def string_to_dense(p: PauliString) -> np.ndarray:
    """2^n x 2^n complex matrix of a Pauli string.

    Built directly as a signed permutation: column b maps to row b XOR x
    with sign (-1)^{popcount(b AND z)} and a global i^{#Y} phase.
    """
    _check_dense_n(p.n)
    dim = 1 << p.n
    xr = _revbits(p.x_mask, p.n)
    zr = _revbits(p.z_mask, p.n)
    cols = np.arange(dim, dtype=np.int64)
    signs = 1.0 - 2.0 * _parity(cols & zr)
    phase = 1j ** ((p.x_mask & p.z_mask).bit_count() % 4)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[cols ^ xr, cols] = phase * signs
    return mat


def to_dense(a: PauliSum) -> np.ndarray:
    _check_dense_n(a.n)
    dim = 1 << a.n
    mat = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim, dtype=np.int64)
    for p, coeff in a.items():
        xr = _revbits(p.x_mask, a.n)
        zr = _revbits(p.z_mask, a.n)
        signs = 1.0 - 2.0 * _parity(cols & zr)
        phase = 1j ** ((p.x_mask & p.z_mask).bit_count() % 4)
        mat[cols ^ xr, cols] += coeff * phase * signs
    return mat


def _fwht(v: np.ndarray) -> np.ndarray:
    """In-place unnormalized Walsh-Hadamard transform (length power of two)."""
    m = len(v)
    h = 1
    while h < m:
        v = v.reshape(-1, 2, h)
        top = v[:, 0, :].copy()
        v[:, 0, :] = top + v[:, 1, :]
        v[:, 1, :] = top - v[:, 1, :]
        v = v.reshape(m)
        h *= 2
    return v


def pauli_decompose(mat: np.ndarray, n: int, prune_tol: float = 0.0) -> PauliSum:
    """Expand a 2^n x 2^n matrix in the Pauli basis: mat = sum_P k_P P.

    k_P = tr(mat P) / 2^n, computed for all 4^n strings in O(4^n n) via a
    Walsh-Hadamard transform over the diagonal masks of each permutation
    stripe. Coefficients below prune_tol are dropped.
    """
    _check_dense_n(n)
    dim = 1 << n
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix for n={n}")
    cols = np.arange(dim)
    floor = max(prune_tol, 1e-15 * max(1.0, float(np.abs(mat).max())))
    terms: dict[PauliString, complex] = {}
    for xr in range(dim):
        stripe = mat[cols, cols ^ xr].copy()
        s = _fwht(stripe)
        x_mask = _revbits(xr, n)
        for zr in np.flatnonzero(np.abs(s) >= floor * dim):
            zr = int(zr)
            phase = 1j ** ((xr & zr).bit_count() % 4)
            coeff = phase * s[zr] / dim
            if abs(coeff) >= floor:
                terms[PauliString(n, x_mask, _revbits(zr, n))] = coeff
    return PauliSum(n, terms)


@dataclass(frozen=True)
class DiagReport:
    """Dense error metrics for a candidate diagonalizer K of h.

    offdiag_mass is the Frobenius norm of the off-diagonal part of K^dag h K
    and must satisfy offdiag_mass <= bound_offdiag = sqrt(F / 2^n) exactly
    (up to roundoff). bound_spec = 2 * bound_offdiag
    + 6 (1 + sqrt(F)) ||h||_F sqrt(eps) dominates ||h - h_tilde||_2 whenever
    it applies, which is only when eps = 2^n * penalty <= 1/4.
    """

    n: int
    f_value: float
    penalty: float
    frob_error: float
    spec_error: float
    unitarity_error: float
    offdiag_mass: float
    bound_offdiag: float
    eps: float
    bound_spec: float
    bound_spec_applicable: bool

    @property
    def total(self) -> float:
        return self.f_value + self.penalty

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "f_value": self.f_value,
            "penalty": self.penalty,
            "F_total": self.total,
            "frob_error": self.frob_error,
            "spec_error": self.spec_error,
            "unitarity_error": self.unitarity_error,
            "offdiag_mass": self.offdiag_mass,
            "bound_offdiag": self.bound_offdiag,
            "eps": self.eps,
            "bound_spec": self.bound_spec,
            "bound_spec_applicable": self.bound_spec_applicable,
        }


def kparams_to_dense(kp: KParams) -> np.ndarray:
    return to_dense(k_as_sum(kp))


def diag_report(
    h: PauliSum,
    kp: KParams,
    f_value: Optional[float] = None,
    penalty: Optional[float] = None,
    support=None,
) -> DiagReport:
    """Compute all dense error metrics and a posteriori bounds for (h, kp).

    f_value and penalty may be passed in from an optimizer run; when omitted
    they are recomputed from scratch so the report stands on its own.
    """
    if h.n != kp.n:
        raise ValueError("hamiltonian and parameters disagree on qubit count")
    if abs(kp.r_norm - 1.0) > 1e-8:
        raise ValueError("kp.r must have unit norm")
    if f_value is None or penalty is None:
        rep = eval_F(h, kp, support if support is not None else
                     build_support_sets(h, kp.ansatz))
        f_value, penalty = rep.f_value, rep.penalty

    n = h.n
    dim = 1 << n
    hd = to_dense(h)
    k = kparams_to_dense(kp)
    g = k.conj().T @ hd @ k
    diag = np.diag(g).real
    delta = g - np.diag(diag)
    h_tilde = (k * diag) @ k.conj().T

    diff = hd - h_tilde
    frob_error = float(np.linalg.norm(diff))
    spec_error = float(np.max(np.abs(np.linalg.eigvalsh(diff))))
    eye = np.eye(dim)
    unitarity_error = float(np.linalg.norm(k.conj().T @ k - eye))
    offdiag_mass = float(np.linalg.norm(delta))

    total = f_value + penalty
    eps = dim * penalty
    bound_offdiag = math.sqrt(max(total, 0.0) / dim)
    h_frob = float(np.linalg.norm(hd))
    # 2 * ||Delta||_F bound plus the near-unitarity correction; the first term
    # must stay linear in the Frobenius mass (a quadratic term would drop below
    # the true spectral error once the mass is below 1/2)
    bound_spec = 2.0 * bound_offdiag + 6.0 * (1.0 + math.sqrt(max(total, 0.0))) * h_frob * math.sqrt(max(eps, 0.0))
    return DiagReport(
        n=n,
        f_value=float(f_value),
        penalty=float(penalty),
        frob_error=frob_error,
        spec_error=spec_error,
        unitarity_error=unitarity_error,
        offdiag_mass=offdiag_mass,
        bound_offdiag=bound_offdiag,
        eps=float(eps),
        bound_spec=float(bound_spec),
        bound_spec_applicable=bool(eps <= 0.25),
    )


def projector_distances(
    h: PauliSum,
    h_tilde: np.ndarray,
    tol_degen: Optional[float] = None,
) -> list[tuple[float, float]]:
    """Frobenius distances between matched eigenspace projectors.

    Eigenvalues of h are grouped into clusters (degeneracy tolerance
    tol_degen, default 1e-8 * ||h||_2); each cluster of multiplicity m
    claims the m eigenvalues of h_tilde closest to the cluster mean. An
    ambiguous claim (a boundary tie, or two clusters claiming the same
    eigenvalue) raises ValueError.
    """
    if h.n > 10:
        raise DenseLimitError("projector distances support at most 10 qubits")
    hd = to_dense(h)
    evals, evecs = np.linalg.eigh(hd)
    h_tilde = np.asarray(h_tilde, dtype=complex)
    t_evals, t_evecs = np.linalg.eigh(h_tilde)

    norm2 = float(np.max(np.abs(evals))) if len(evals) else 0.0
    if tol_degen is None:
        tol_degen = 1e-8 * norm2
    tie_tol = 1e-12 * max(1.0, norm2)

    splits = np.flatnonzero(np.diff(evals) > tol_degen)
    starts = np.concatenate(([0], splits + 1))
    ends = np.concatenate((splits + 1, [len(evals)]))

    claimed: dict[int, float] = {}
    out: list[tuple[float, float]] = []
    for s0, e0 in zip(starts, ends):
        m = int(e0 - s0)
        lam = float(np.mean(evals[s0:e0]))
        dist = np.abs(t_evals - lam)
        order = np.argsort(dist, kind="stable")
        chosen = order[:m]
        if m < len(t_evals) and dist[order[m]] - dist[order[m - 1]] <= tie_tol:
            raise ValueError(
                "ambiguous eigenvalue assignment for cluster at "
                f"{lam:.12g}: candidates {t_evals[order[m - 1]]:.12g} and "
                f"{t_evals[order[m]]:.12g} are equidistant"
            )
        for idx in chosen:
            idx = int(idx)
            if idx in claimed:
                raise ValueError(
                    f"eigenvalue {t_evals[idx]:.12g} claimed by clusters at "
                    f"{claimed[idx]:.12g} and {lam:.12g}"
                )
            claimed[idx] = lam
        p_h = evecs[:, s0:e0] @ evecs[:, s0:e0].conj().T
        p_t = t_evecs[:, chosen] @ t_evecs[:, chosen].conj().T
        out.append((lam, float(np.linalg.norm(p_t - p_h))))
    return out


class LieClosure(NamedTuple):
    dim: int
    hit_cap: bool


def lie_closure_dim(generators: Sequence[PauliString], cap: int) -> LieClosure:
    """Dimension of the commutator closure of a set of Pauli strings.

    Nonzero commutators of Pauli strings are Pauli strings up to phase, so
    the closure's span dimension equals the count of distinct phase-stripped
    strings reachable by nested commutators. The identity is central and is
    excluded from the count. Stops early once cap strings are reached.
    """
    if not generators:
        raise ValueError("need at least one generator")
    if cap < 1:
        raise ValueError("cap must be positive")
    n = generators[0].n
    for g in generators:
        if g.n != n:
            raise ValueError("generators must share a qubit count")
    seeds = sorted({g for g in generators if not g.is_identity})
    if not seeds:
        return LieClosure(0, False)
    queue: list[PauliString] = list(seeds[: cap])
    known = set(queue)
    if len(queue) >= cap:
        return LieClosure(cap, True)
    i = 0
    while i < len(queue):
        a = queue[i]
        for j in range(i):
            b = queue[j]
            if commutes(a, b):
                continue
            _, c = multiply(a, b)
            if c not in known:
                known.add(c)
                queue.append(c)
                if len(queue) >= cap:
                    return LieClosure(cap, True)
        i += 1
    return LieClosure(len(queue), False)


def generating_set_check(n: int) -> bool:
    """True iff the two-local-plus-chains generator family spans everything.

    The family {Z1, Z2, X1, X2, Z1Z2} plus the anticommuting chains
    {X2 Y3..Y_{j-1} Z_j, Z2 Y3..Y_{j-1} X_j : 3 <= j <= n} should close onto
    all 4^n - 1 non-identity strings.
    """
    if not 3 <= n <= 6:
        raise ValueError("supported range is 3 <= n <= 6")

    def word(pairs: dict[int, str]) -> PauliString:
        chars = ["I"] * n
        for q, op in pairs.items():
            chars[q] = op
        return PauliString.from_word("".join(chars))

    gens = [
        word({0: "Z"}),
        word({1: "Z"}),
        word({0: "X"}),
        word({1: "X"}),
        word({0: "Z", 1: "Z"}),
    ]
    for j in range(3, n + 1):
        chain = {q: "Y" for q in range(2, j - 1)}
        gens.append(word({1: "X", **chain, j - 1: "Z"}))
        gens.append(word({1: "Z", **chain, j - 1: "X"}))
    result = lie_closure_dim(gens, cap=4 ** n)
    return result.dim == 4 ** n - 1 and not result.hit_cap
