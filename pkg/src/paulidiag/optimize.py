"""Normalized gradient descent and randomized coordinate descent.

Both optimizers walk x_{t+1} = (r(y_t)/||r(y_t)||, theta(y_t)) with
y_t = x_t - a_t g_t. GD uses the full exact gradient recomputed from scratch
every iteration. RCD samples S of the 2d coordinates uniformly without
replacement, computes only those partials from cached coefficient tables
(K'HK over the closure, H*K over its support, phi over g2) and updates the
caches incrementally: a sparse correction for the stepped parameters followed
by an exact global rescale for the normalization. Caches are rebuilt from
scratch every refresh_every iterations and the observed drift is recorded.

With S = 2d the sampled set is always the full coordinate set, so one RCD
iteration reproduces one GD iteration (same step, seed-independent); run_rcd
delegates that case to run_gd.

Per-iteration trace records: for RCD the recorded grad_norm / alpha_estimate
cover the sampled coordinates only; at S = 2d they equal the full quantities.
alpha_estimate is log(||g||^2/4) / log F, the local Lojasiewicz exponent read
off with mu = 1; it is NaN when F is 0 or 1 or the gradient vanishes.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cost import KParams, eval_grad
from .operators import PauliSum, SupportSets, build_support_sets

RADIAL_COLLAPSE_TOL = 1e-14


class RadialCollapseError(RuntimeError):
    """The pre-normalization amplitude norm fell below 1e-14; the normalized
    iteration is undefined from here."""

    def __init__(self, iteration: int, norm: float, trace: "OptTrace"):
        self.iteration = iteration
        self.norm = norm
        self.trace = trace
        super().__init__(
            f"radial collapse at iteration {iteration}: ||r(y)|| = {norm:.3e}"
        )


@dataclass(frozen=True)
class LRSchedule:
    """Step sizes a_t: constant a, or decaying a0 / (1 + rate * t)."""

    kind: str
    a: float
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "decay"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"step size {self.a} outside (0, 1)")
        if self.rate < 0.0:
            raise ValueError(f"decay rate {self.rate} must be nonnegative")

    @classmethod
    def constant(cls, a: float) -> "LRSchedule":
        return cls("constant", a)

    @classmethod
    def decay(cls, a0: float, rate: float) -> "LRSchedule":
        return cls("decay", a0, rate)


def lr_schedule_eval(schedule: LRSchedule, t: int) -> float:
    if schedule.kind == "constant":
        return schedule.a
    return schedule.a / (1.0 + schedule.rate * t)


@dataclass(frozen=True)
class OptConfig:
    max_iters: int
    lr: LRSchedule | None = None  # None -> 0.05 constant for GD, 0.1 for RCD
    block_size: int = 4
    seed: int = 0
    stop_tol: float = 1e-10
    grad_tol: float = 1e-12
    refresh_every: int = 50

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")
        if self.stop_tol < 0 or self.grad_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be positive")


GD_DEFAULT_LR = LRSchedule.constant(0.05)
RCD_DEFAULT_LR = LRSchedule.constant(0.1)


def estimate_alpha(f_total: float, grad_norm: float) -> float:
    """Local Lojasiewicz exponent with mu = 1: ||grad F||^2 = 4 F^alpha.

    NaN marks the undefined cases (F = 0, F = 1, zero gradient)."""
    if not (f_total > 0.0) or f_total == 1.0 or not (grad_norm > 0.0):
        return math.nan
    return math.log(grad_norm * grad_norm / 4.0) / math.log(f_total)


def rolling_median(values, window: int = 20) -> list[float]:
    """Trailing-window median, NaN-aware; NaN where the window is all-NaN."""
    out = []
    vals = list(values)
    for i in range(len(vals)):
        chunk = [v for v in vals[max(0, i - window + 1) : i + 1] if not math.isnan(v)]
        out.append(float(np.median(chunk)) if chunk else math.nan)
    return out


@dataclass
class TraceRecord:
    iteration: int
    F_total: float
    f_value: float
    penalty: float
    grad_norm: float
    alpha_estimate: float
    r_norm_pre_normalization: float
    wall_time: float

    def as_dict(self, include_wall_time: bool = False) -> dict:
        out = {
            "iter": self.iteration,
            "F_total": self.F_total,
            "f_value": self.f_value,
            "penalty": self.penalty,
            "grad_norm": self.grad_norm,
            "alpha_estimate": None
            if math.isnan(self.alpha_estimate)
            else self.alpha_estimate,
            "r_norm_pre_normalization": self.r_norm_pre_normalization,
        }
        if include_wall_time:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class OptTrace:
    records: list[TraceRecord] = field(default_factory=list)
    final_params: KParams | None = None
    stop_reason: str = ""
    refresh_drifts: list[float] = field(default_factory=list)

    @property
    def final_cost(self) -> float:
        return self.records[-1].F_total if self.records else math.nan

    @property
    def drift_max(self) -> float:
        return max(self.refresh_drifts, default=0.0)

    def alpha_medians(self, window: int = 20) -> list[float]:
        return rolling_median((rec.alpha_estimate for rec in self.records), window)

    def save_jsonl(self, path) -> None:
        # wall times are not deterministic, so they stay out of the file;
        # identical inputs then give byte-identical traces
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.as_dict()) + "\n")


def _require_unit_r(kp: KParams) -> None:
    if abs(kp.r_norm - 1.0) > 1e-8:
        raise ValueError(f"initial amplitudes must be unit norm, got ||r|| = {kp.r_norm}")


def run_gd(
    h: PauliSum, kp0: KParams, cfg: OptConfig, support: SupportSets | None = None
) -> OptTrace:
    """Algorithm: full-gradient descent with per-step amplitude renormalization."""
    _require_unit_r(kp0)
    s = support if support is not None else build_support_sets(h, kp0.ansatz)
    lr = cfg.lr if cfg.lr is not None else GD_DEFAULT_LR
    trace = OptTrace()
    x = kp0
    for t in range(cfg.max_iters + 1):
        t0 = time.perf_counter()
        rep = eval_grad(h, x, s)
        alpha = estimate_alpha(rep.total, rep.grad_norm)

        def record(r_norm_pre: float) -> None:
            trace.records.append(
                TraceRecord(
                    iteration=t,
                    F_total=rep.total,
                    f_value=rep.f_value,
                    penalty=rep.penalty,
                    grad_norm=rep.grad_norm,
                    alpha_estimate=alpha,
                    r_norm_pre_normalization=r_norm_pre,
                    wall_time=time.perf_counter() - t0,
                )
            )

        if rep.total < cfg.stop_tol:
            record(x.r_norm)
            trace.stop_reason = "converged"
            break
        if rep.grad_norm < cfg.grad_tol:
            record(x.r_norm)
            trace.stop_reason = "stationary"
            break
        if t == cfg.max_iters:
            record(x.r_norm)
            trace.stop_reason = "max_iters"
            break

        a = lr_schedule_eval(lr, t)
        y_r = x.r - a * rep.grad_r
        y_theta = x.theta - a * rep.grad_theta
        nr = float(np.linalg.norm(y_r))
        record(nr)
        if nr < RADIAL_COLLAPSE_TOL:
            trace.stop_reason = "radial_collapse"
            trace.final_params = x
            raise RadialCollapseError(t, nr, trace)
        x = x.with_params(y_r / nr, y_theta)

    trace.final_params = x
    return trace


# --- incremental caches for RCD ----------------------------------------------


class IncrementalState:
    """Cached coefficient tables of K'HK, H*K and phi for the current params.

    apply_update moves the caches across one sparse coordinate step plus the
    global renormalization rescale; refresh rebuilds everything from scratch
    and reports the accumulated drift."""

    def __init__(self, s: SupportSets, r: np.ndarray, theta: np.ndarray):
        self.s = s
        self.two_n = float(2**s.n)
        self._offdiag = np.zeros(len(s.closure), dtype=bool)
        self._offdiag[s.g1_closure_idx] = True
        self.r = np.array(r, dtype=float)
        self.theta = np.array(theta, dtype=float)
        self._rebuild()

    def _rebuild(self):
        s = self.s
        self.k = s.k_coeffs(self.r, self.theta)
        self.hk = s.hk_vector(self.k)
        self.khk = s.khk_vector(self.k, self.hk)
        self.phi = s.phi_vector(self.r, self.theta)
        t = self.two_n * self.khk[s.g1_closure_idx].real
        self.f_value = float(np.sum(t * t))
        self.penalty = float(np.sum(self.phi.real**2 + self.phi.imag**2))

    @property
    def total(self) -> float:
        return self.f_value + self.penalty

    def params(self) -> tuple[np.ndarray, np.ndarray]:
        return self.r.copy(), self.theta.copy()

    def sparse_grad(self, coords: np.ndarray):
        """Exact partials for the sampled coordinate indices (r_j for
        coords < d, theta_{j-d} otherwise), zeros elsewhere."""
        s = self.s
        d = s.d
        coords = np.asarray(coords)
        r_coords = coords[coords < d]
        t_coords = coords[coords >= d] - d
        J = np.unique(coords % d)

        t = self.two_n * self.khk[s.g1_closure_idx].real
        W = s.grad_phase[:, J] * self.hk[s.grad_tgt[:, J]]
        W = W * (self.two_n * np.exp(-1j * self.theta[J]))[None, :]
        tw = t.astype(complex) @ W
        tw_full = np.zeros(d, dtype=complex)
        tw_full[J] = tw
        gr = np.zeros(d)
        gt = np.zeros(d)
        gr[r_coords] = 4.0 * tw_full[r_coords].real
        gt[t_coords] = 4.0 * self.r[t_coords] * tw_full[t_coords].imag

        if len(s.phi_p) and len(J) > d // 4:
            # wide blocks: the dense bincount formula beats the per-index loop
            r, theta, phi = self.r, self.theta, self.phi
            a = (
                phi.conj()[s.phi_p]
                * s.phi_phase
                * np.exp(1j * (theta[s.phi_j] - theta[s.phi_jp]))
            )
            pen_r = 2.0 * np.bincount(s.phi_j, weights=a.real * r[s.phi_jp], minlength=d)
            pen_r += 2.0 * np.bincount(s.phi_jp, weights=a.real * r[s.phi_j], minlength=d)
            rr = r[s.phi_j] * r[s.phi_jp]
            pen_t = -2.0 * np.bincount(s.phi_j, weights=a.imag * rr, minlength=d)
            pen_t += 2.0 * np.bincount(s.phi_jp, weights=a.imag * rr, minlength=d)
            gr[r_coords] += pen_r[r_coords]
            gt[t_coords] += pen_t[t_coords]
        elif len(s.phi_p):
            r, theta, phi = self.r, self.theta, self.phi
            r_set = set(r_coords.tolist())
            t_set = set(t_coords.tolist())
            for j in J.tolist():
                E = s.phi_entries_by_j[j]
                if not len(E):
                    continue
                ej, ejp = s.phi_j[E], s.phi_jp[E]
                a = (
                    phi.conj()[s.phi_p[E]]
                    * s.phi_phase[E]
                    * np.exp(1j * (theta[ej] - theta[ejp]))
                )
                j_side = ej == j
                if j in r_set:
                    partner_r = np.where(j_side, r[ejp], r[ej])
                    gr[j] += 2.0 * float(np.sum(a.real * partner_r))
                if j in t_set:
                    rr = r[ej] * r[ejp]
                    signed = np.where(j_side, -a.imag, a.imag)
                    gt[j] += 2.0 * float(np.sum(signed * rr))

        gnorm = float(np.sqrt(np.dot(gr, gr) + np.dot(gt, gt)))
        return gr, gt, gnorm

    def apply_update(self, J: np.ndarray, y_r: np.ndarray, y_theta: np.ndarray, nr: float):
        """Advance caches to ((y_r)/nr, y_theta); only ansatz indices J moved."""
        s = self.s
        if len(J) == s.d:
            # full block touches every cache entry; a fresh rebuild is cheaper
            # than the incremental correction and leaves zero drift
            self.r = y_r / nr
            self.theta = np.array(y_theta, dtype=float)
            self._rebuild()
            return
        k_old = self.k
        k_new = y_r * np.exp(1j * y_theta)

        # H*K correction from the changed K coefficients
        E = np.concatenate([s.hk_entries_by_k[j] for j in J])
        contrib = (
            s.h_coeffs[s.hk_src_h[E]]
            * (k_new - k_old)[s.hk_src_k[E]]
            * s.hk_phase[E]
        )
        tgt = s.hk_tgt[E]
        dhk = np.zeros(len(s.hk_strings) + 1, dtype=complex)
        np.add.at(dhk, tgt, contrib)
        touched_hk = np.unique(tgt)

        # K'(HK) corrections: old-K against the H*K delta, then K delta
        # against the updated H*K
        E_A = (
            np.concatenate([s.khk_entries_by_s[si] for si in touched_hk])
            if len(touched_hk)
            else np.empty(0, dtype=np.intp)
        )
        contrib_A = (
            k_old.conj()[s.khk_src_a[E_A]] * dhk[s.khk_src_s[E_A]] * s.khk_phase[E_A]
        )
        self.hk += dhk
        E_B = np.concatenate([s.khk_entries_by_a[j] for j in J])
        contrib_B = (
            (k_new - k_old).conj()[s.khk_src_a[E_B]]
            * self.hk[s.khk_src_s[E_B]]
            * s.khk_phase[E_B]
        )
        tgt_AB = np.concatenate([s.khk_tgt[E_A], s.khk_tgt[E_B]])
        contrib_AB = np.concatenate([contrib_A, contrib_B])
        touched_khk = np.unique(tgt_AB)
        tk = touched_khk[self._offdiag[touched_khk]]
        t_old = self.two_n * self.khk[tk].real
        dkhk = np.zeros(len(s.closure), dtype=complex)
        np.add.at(dkhk, tgt_AB, contrib_AB)
        self.khk += dkhk
        t_new = self.two_n * self.khk[tk].real
        self.f_value += float(np.sum(t_new * t_new) - np.sum(t_old * t_old))

        # phi corrections for every pair entry touching J
        if len(s.phi_p):
            E_phi = np.unique(np.concatenate([s.phi_entries_by_j[j] for j in J]))
            if len(E_phi):
                ej, ejp = s.phi_j[E_phi], s.phi_jp[E_phi]
                c = s.phi_phase[E_phi]
                old_c = (
                    c * self.r[ej] * self.r[ejp]
                    * np.exp(1j * (self.theta[ej] - self.theta[ejp]))
                )
                new_c = c * y_r[ej] * y_r[ejp] * np.exp(1j * (y_theta[ej] - y_theta[ejp]))
                tgt_p = s.phi_p[E_phi]
                touched_phi = np.unique(tgt_p)
                pen_old = self.phi[touched_phi]
                pen_old = float(np.sum(pen_old.real**2 + pen_old.imag**2))
                dphi = np.zeros(len(s.g2), dtype=complex)
                np.add.at(dphi, tgt_p, new_c - old_c)
                self.phi += dphi
                pen_new = self.phi[touched_phi]
                pen_new = float(np.sum(pen_new.real**2 + pen_new.imag**2))
                self.penalty += pen_new - pen_old

        # adopt parameters, then fold the normalization rescale into the caches;
        # r uses the same division run_gd performs so the trajectories match
        # bit for bit at S = 2d
        inv = 1.0 / nr
        self.r = y_r / nr
        self.theta = np.array(y_theta, dtype=float)
        self.k = k_new * inv
        self.hk *= inv
        self.khk *= inv * inv
        self.phi *= inv * inv
        self.f_value *= inv**4
        self.penalty *= inv**4

    def refresh(self) -> float:
        """Rebuild from scratch; returns the worst relative drift seen."""
        old = (self.hk, self.khk, self.phi, self.f_value, self.penalty)
        self._rebuild()
        hk_o, khk_o, phi_o, f_o, pen_o = old
        drift = max(
            float(np.max(np.abs(hk_o - self.hk), initial=0.0)),
            float(np.max(np.abs(khk_o - self.khk), initial=0.0)),
            float(np.max(np.abs(phi_o - self.phi), initial=0.0)),
            abs(f_o - self.f_value) / max(1.0, abs(self.f_value)),
            abs(pen_o - self.penalty) / max(1.0, abs(self.penalty)),
        )
        return drift


def run_rcd(
    h: PauliSum, kp0: KParams, cfg: OptConfig, support: SupportSets | None = None
) -> OptTrace:
    """Randomized coordinate descent over the 2d coordinates (r, theta).

    Each iteration samples block_size coordinates uniformly without
    replacement, steps them with exact partials from the incremental caches,
    then renormalizes r. block_size = 2d always samples every coordinate, so
    that case runs the full-gradient loop outright (bit-identical trajectory,
    no sampling, no incremental caches)."""
    _require_unit_r(kp0)
    s = support if support is not None else build_support_sets(h, kp0.ansatz)
    d = s.d
    if cfg.block_size > 2 * d:
        raise ValueError(f"block_size {cfg.block_size} exceeds 2d = {2 * d}")
    lr = cfg.lr if cfg.lr is not None else RCD_DEFAULT_LR
    if cfg.block_size == 2 * d:
        return run_gd(h, kp0, replace(cfg, lr=lr), s)
    rng = np.random.default_rng(cfg.seed)
    state = IncrementalState(s, kp0.r, kp0.theta)
    trace = OptTrace()

    def current_params() -> KParams:
        r, theta = state.params()
        return kp0.with_params(r, theta)

    for t in range(cfg.max_iters + 1):
        t0 = time.perf_counter()
        f_value, penalty = state.f_value, state.penalty
        total = f_value + penalty
        coords = rng.choice(2 * d, size=cfg.block_size, replace=False)
        gr, gt, gnorm = state.sparse_grad(coords)
        alpha = estimate_alpha(total, gnorm)

        def record(r_norm_pre: float) -> None:
            trace.records.append(
                TraceRecord(
                    iteration=t,
                    F_total=total,
                    f_value=f_value,
                    penalty=penalty,
                    grad_norm=gnorm,
                    alpha_estimate=alpha,
                    r_norm_pre_normalization=r_norm_pre,
                    wall_time=time.perf_counter() - t0,
                )
            )

        r_now = float(np.linalg.norm(state.r))
        if total < cfg.stop_tol:
            record(r_now)
            trace.stop_reason = "converged"
            break
        if gnorm < cfg.grad_tol:
            # a sampled block can have zero partials away from stationarity,
            # so confirm against the full gradient before stopping
            _, _, full_gnorm = state.sparse_grad(np.arange(2 * d))
            if full_gnorm < cfg.grad_tol:
                record(r_now)
                trace.stop_reason = "stationary"
                break
        if t == cfg.max_iters:
            record(r_now)
            trace.stop_reason = "max_iters"
            break

        a = lr_schedule_eval(lr, t)
        y_r = state.r - a * gr
        y_theta = state.theta - a * gt
        nr = float(np.linalg.norm(y_r))
        record(nr)
        if nr < RADIAL_COLLAPSE_TOL:
            trace.stop_reason = "radial_collapse"
            trace.final_params = current_params()
            raise RadialCollapseError(t, nr, trace)
        J = np.unique(coords % d)
        state.apply_update(J, y_r, y_theta, nr)
        if (t + 1) % cfg.refresh_every == 0:
            trace.refresh_drifts.append(state.refresh())

    trace.final_params = current_params()
    return trace
