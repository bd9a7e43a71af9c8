"""Hamiltonian families and warm starts: XXZ chains, Hubbard chains, random
conjugated-diagonal instances, and an anticommuting-chain family whose Lie
closure is full-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cost import KParams
from .operators import PauliSum, sum_multiply
from .pauli import PauliString, commutes, multiply, parse
from .verify import pauli_decompose, to_dense


def _word(n: int, ops: dict[int, str]) -> PauliString:
    chars = ["I"] * n
    for q, op in ops.items():
        chars[q] = op
    return PauliString.from_word("".join(chars))


def build_xxz(n: int, j: float, delta: float) -> PauliSum:
    """Open XXZ chain: j*(XX + YY) plus delta*ZZ on each bond; 3(n-1) terms."""
    if n < 2:
        raise ValueError("need at least 2 sites")
    terms: dict[PauliString, complex] = {}
    for i in range(n - 1):
        terms[_word(n, {i: "X", i + 1: "X"})] = j
        terms[_word(n, {i: "Y", i + 1: "Y"})] = j
        terms[_word(n, {i: "Z", i + 1: "Z"})] = delta
    return PauliSum(n, terms)


def build_hubbard(sites: int, t: float, u: float) -> PauliSum:
    """Open Fermi-Hubbard chain on 2*sites qubits, interleaved spin layout.

    Qubit 2j holds (site j, up) and qubit 2j+1 holds (site j, down). Hopping
    contributes -t/2 (XX + YY) per spin channel and bond; the on-site
    interaction contributes u/4 (-Z_up - Z_down + Z_up Z_down) per site. The
    constant shift is dropped.
    """
    if sites < 1:
        raise ValueError("need at least 1 site")
    n = 2 * sites
    terms: dict[PauliString, complex] = {}
    for j in range(sites - 1):
        for spin in (0, 1):
            a, b = 2 * j + spin, 2 * (j + 1) + spin
            terms[_word(n, {a: "X", b: "X"})] = -t / 2
            terms[_word(n, {a: "Y", b: "Y"})] = -t / 2
    for j in range(sites):
        up, dn = 2 * j, 2 * j + 1
        terms[_word(n, {up: "Z"})] = -u / 4
        terms[_word(n, {dn: "Z"})] = -u / 4
        terms[_word(n, {up: "Z", dn: "Z"})] = u / 4
    return PauliSum(n, terms)


@dataclass(frozen=True)
class RotationProduct:
    """Ordered product of Pauli rotations prod_i exp(i * angle_i * P_i).

    factors[0] is the leftmost (outermost) factor of the product.
    """

    n: int
    factors: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        factors = tuple((float(a), p) for a, p in self.factors)
        for _, p in factors:
            if p.n != self.n:
                raise ValueError("rotation generators must share the qubit count")
        object.__setattr__(self, "factors", factors)

    def __len__(self) -> int:
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)


def expand_rotation_product(rp: RotationProduct) -> PauliSum:
    """Exact Pauli-sum expansion: each factor is cos(a)*I + i*sin(a)*P."""
    acc = PauliSum.identity(rp.n)
    ident = PauliString.identity(rp.n)
    for angle, p in rp.factors:
        factor = PauliSum(rp.n, {ident: math.cos(angle)})
        factor = factor + PauliSum(rp.n, {p: 1j * math.sin(angle)})
        acc = sum_multiply(acc, factor)
    return acc


def conjugate_by_rotation(a: PauliSum, angle: float, p: PauliString) -> PauliSum:
    """exp(i*angle*p) a exp(-i*angle*p), term by term.

    Commuting terms pass through; an anticommuting term Q becomes
    cos(2*angle)*Q + i*sin(2*angle)*(p*Q).
    """
    if a.n != p.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {p.n}")
    c2 = math.cos(2 * angle)
    s2 = math.sin(2 * angle)
    acc: dict[PauliString, complex] = {}
    for q, coeff in a.items():
        if commutes(p, q):
            acc[q] = acc.get(q, 0j) + coeff
        else:
            ph, pq = multiply(p, q)
            acc[q] = acc.get(q, 0j) + coeff * c2
            acc[pq] = acc.get(pq, 0j) + coeff * 1j * s2 * ph.value
    return PauliSum(a.n, acc)


def build_random_udu(
    n: int, n_diag: int, n_rot: int, seed: int
) -> tuple[PauliSum, RotationProduct, PauliSum]:
    """Random instance with known spectrum: h = u * d * u_adjoint.

    d is a sum of n_diag distinct diagonal strings with coefficients uniform
    in [-1, 1]; u is a product of n_rot rotations about distinct non-diagonal
    strings with angles uniform in [-pi/2, pi/2]. The conjugation is expanded
    exactly, so h's term count is at most n_diag * 2^n_rot.
    """
    if n_diag < 1:
        raise ValueError("need at least one diagonal string")
    if n_diag > 2 ** n:
        raise ValueError(f"only {2 ** n} diagonal strings exist on {n} qubits")
    if n_rot < 0:
        raise ValueError("n_rot must be nonnegative")
    rng = np.random.default_rng(seed)

    z_seen: set[int] = set()
    d_terms: dict[PauliString, complex] = {}
    while len(d_terms) < n_diag:
        z = int(rng.integers(0, 1 << n))
        if z in z_seen:
            continue
        z_seen.add(z)
        d_terms[PauliString(n, 0, z)] = float(rng.uniform(-1.0, 1.0))
    d_sum = PauliSum(n, d_terms)

    rot_seen: set[tuple[int, int]] = set()
    factors: list[tuple[float, PauliString]] = []
    while len(factors) < n_rot:
        x = int(rng.integers(1, 1 << n))
        z = int(rng.integers(0, 1 << n))
        if (x, z) in rot_seen:
            continue
        rot_seen.add((x, z))
        angle = float(rng.uniform(-math.pi / 2, math.pi / 2))
        factors.append((angle, PauliString(n, x, z)))
    u = RotationProduct(n, tuple(factors))

    h = d_sum
    for angle, p in reversed(factors):
        h = conjugate_by_rotation(h, angle, p)
    return h, u, d_sum


def _prefix_to_sum(n: int, gates: Sequence) -> PauliSum:
    """Expand an ordered gate list into an exact Pauli-sum unitary.

    Supported gates: ("s", q), ("h", q), ("cnot", control, target),
    ("rot", angle, pauli string or word). The first gate is the leftmost
    factor of the product.
    """
    ident = PauliString.identity(n)
    acc = PauliSum.identity(n)
    for gate in gates:
        kind = gate[0]
        if kind == "s":
            q = gate[1]
            g = PauliSum(n, {ident: (1 + 1j) / 2, _word(n, {q: "Z"}): (1 - 1j) / 2})
        elif kind == "h":
            q = gate[1]
            inv_sqrt2 = 1.0 / math.sqrt(2.0)
            g = PauliSum(n, {_word(n, {q: "X"}): inv_sqrt2, _word(n, {q: "Z"}): inv_sqrt2})
        elif kind == "cnot":
            ctl, tgt = gate[1], gate[2]
            g = PauliSum(n, {
                ident: 0.5,
                _word(n, {ctl: "Z"}): 0.5,
                _word(n, {tgt: "X"}): 0.5,
                _word(n, {ctl: "Z", tgt: "X"}): -0.5,
            })
        elif kind == "rot":
            angle, p = gate[1], gate[2]
            if isinstance(p, str):
                p = parse(p, n)
            if p.n != n:
                raise ValueError("rotation generator on wrong qubit count")
            g = PauliSum(n, {ident: math.cos(angle)}) + PauliSum(n, {p: 1j * math.sin(angle)})
        else:
            raise ValueError(f"unknown gate kind {kind!r}")
        acc = sum_multiply(acc, g)
    return acc


def build_example_hams(
    n: int,
    theta: float,
    c: Sequence[float],
    d: Sequence[float],
    clifford_prefix: Optional[Sequence] = None,
) -> tuple[PauliSum, PauliSum, PauliSum]:
    """Family with provably full-dimensional Lie closure.

    U = prefix * (cos(theta) I + i sin(theta) Z_2) * sum_j c_j A_j where the
    A_j are n+1 pairwise-anticommuting strings (X1Y2, Z1Y2, Z2, then chains
    X2 Y3..Y_{j-1} Z_j), and D = I + sum_j d_j Y_j. Returns (H, U, D) with
    H = U D U_adjoint expanded exactly.

    Requires sum c_j^2 = 1 with every c_j nonzero (this makes the
    anticommuting combination unitary), theta not a multiple of pi, and
    every d_j nonzero.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    c_vec = np.asarray(c, dtype=float)
    d_vec = np.asarray(d, dtype=float)
    if c_vec.shape != (n + 1,):
        raise ValueError(f"c must have {n + 1} entries, got shape {c_vec.shape}")
    if d_vec.shape != (n,):
        raise ValueError(f"d must have {n} entries, got shape {d_vec.shape}")
    if abs(float(c_vec @ c_vec) - 1.0) > 1e-12:
        raise ValueError("entries of c must have unit square sum")
    if np.any(c_vec == 0.0):
        raise ValueError("every entry of c must be nonzero")
    if abs(math.sin(theta)) < 1e-12:
        raise ValueError("theta must not be a multiple of pi")
    if np.any(d_vec == 0.0):
        raise ValueError("every entry of d must be nonzero")

    gens = [
        _word(n, {0: "X", 1: "Y"}),
        _word(n, {0: "Z", 1: "Y"}),
        _word(n, {1: "Z"}),
    ]
    for j in range(3, n + 1):
        chain = {q: "Y" for q in range(2, j - 1)}
        gens.append(_word(n, {1: "X", **chain, j - 1: "Z"}))
    for i in range(len(gens)):
        for k in range(i):
            assert not commutes(gens[i], gens[k]), "generator family must anticommute"

    a_sum = PauliSum(n, {g: coeff for g, coeff in zip(gens, c_vec)})
    ident = PauliString.identity(n)
    rot = PauliSum(n, {ident: math.cos(theta), _word(n, {1: "Z"}): 1j * math.sin(theta)})
    u = sum_multiply(rot, a_sum)
    if clifford_prefix:
        u = sum_multiply(_prefix_to_sum(n, clifford_prefix), u)

    d_sum = PauliSum(n, {ident: 1.0})
    d_sum = d_sum + PauliSum(n, {_word(n, {q: "Y"}): dv for q, dv in enumerate(d_vec)})
    h = sum_multiply(sum_multiply(u, d_sum), u.adjoint())
    return h, u, d_sum


def warm_start_from_dense(h: PauliSum, prune_tol: float = 1e-12) -> KParams:
    """Ansatz and parameters from a dense eigendecomposition of h.

    The eigenvector matrix (ascending eigenvalues, each column's
    largest-magnitude entry gauged real positive) is expanded in the Pauli
    basis; strings below prune_tol are dropped and amplitudes renormalized
    to a unit vector. For a unitary matrix the expansion weights already
    satisfy sum |k_P|^2 = 1, so the renormalization only absorbs pruning
    and roundoff.
    """
    hd = to_dense(h)
    _, evecs = np.linalg.eigh(hd)
    dim = evecs.shape[0]
    lead = np.argmax(np.abs(evecs), axis=0)
    gauge = evecs[lead, np.arange(dim)]
    gauge = gauge / np.abs(gauge)
    k = evecs * gauge.conj()

    expansion = pauli_decompose(k, h.n, prune_tol=prune_tol)
    strings = tuple(sorted(expansion.strings()))
    if not strings:
        raise ValueError("pruning removed every ansatz string")
    coeffs = np.array([expansion.coefficient(p) for p in strings])
    r = np.abs(coeffs)
    theta = np.angle(coeffs)
    return KParams(strings, r / np.linalg.norm(r), theta)
