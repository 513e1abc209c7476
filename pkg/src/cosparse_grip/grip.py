"""Restricted-isometry diagnostics for analysis-sparse models.

For a sensing matrix Phi and analysis operator D, the per-sparsity constant
delta_k measures how far Phi is from acting isometrically on signals whose
analysis image concentrates on k coordinates. Each size-k support Lambda
contributes the larger of two one-sided extremes over the chunk subspace
W_Lambda = { D^+ z : supp(z) in Lambda }:

  * upper: max ||Phi x||^2 / ||D x||^2 over x in W_Lambda, minus 1
    (a generalized eigenvalue problem for the pencil restricted to W_Lambda);
  * lower: 1 minus min ||Phi D^+ z||^2 / ||z||^2 over supp(z) in Lambda
    (smallest eigenvalue of a k x k Gram matrix).

delta_k is the max over supports. Both sides collapse to the classical
eigenvalue extremes of Phi_Lambda^T Phi_Lambda when D is orthogonal (then
W_Lambda is the span of k columns of D^T and D^+ = D^T), so for D = I this
is exactly the textbook RIP constant. The split matters for redundant D:
recovery bounds consume the upper side through image norms ||Dx||_2 and the
lower side through coordinate-mask norms, and a single normalization cannot
serve both.

delta_k is monotone in k (supports nest) and delta < 1 is a hypothesis of
every bound downstream, never a guarantee of this module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .model import Dictionary, SupportSet, sensing_entries

__all__ = [
    "DEFAULT_MAX_SUPPORTS",
    "DEFAULT_MAX_PAIRS",
    "BudgetExceededError",
    "GripReport",
    "RhoEstimate",
    "BoundConstants",
    "delta_exact",
    "delta_monte_carlo",
    "rho_exact",
    "bound_constants",
]

DEFAULT_MAX_SUPPORTS = 3060   # enumeration budget: C(18, 4), i.e. p <= 18 at k <= 4
DEFAULT_MAX_PAIRS = 60000     # disjoint-pair budget for rho_exact

_PD_TOL = 1e-12        # metric Gram must be positive definite past this
_TRIVIAL_TOL = 1e-10   # relative sv cutoff for chunk-subspace bases


class BudgetExceededError(RuntimeError):
    """Raised when exact enumeration would exceed the stated budget."""


@dataclass(frozen=True)
class GripReport:
    """Result of a delta computation.

    method is "exact" or "monte-carlo"; trials is 0 for exact and the
    number of supports actually evaluated otherwise. worst_support attains
    delta (colexicographically smallest on ties). eigen_range is
    (lower-side minimum, upper-side maximum) across evaluated supports,
    i.e. delta = max(eigen_range[1] - 1, 1 - eigen_range[0]).
    """

    k: int
    delta: float
    method: str
    trials: int
    worst_support: SupportSet
    eigen_range: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "delta": self.delta,
                "method": self.method,
                "trials": self.trials,
                "worst_support": list(self.worst_support.indices),
                "eigen_range": list(self.eigen_range),
            }
        )


@dataclass(frozen=True)
class RhoEstimate:
    """Largest principal-angle cosine between disjoint-support chunk
    subspaces, maximized over all disjoint size-k pairs."""

    k: int
    rho: float
    method: str
    witness: tuple[SupportSet, SupportSet]

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "rho": self.rho,
                "method": self.method,
                "witness": [list(s.indices) for s in self.witness],
            }
        )


@dataclass(frozen=True)
class BoundConstants:
    """Closed-form constants of the recovery bounds at a given (delta2k, rho).

    alpha = sqrt(2) (delta2k + rho) / (1 - delta2k), beta = 1 / (1 - delta2k).
    admissible means alpha < 1; c0 = 4 alpha / (1 - alpha) + 2 and
    c1 = 2 beta / (1 - alpha) are +inf when not admissible. c0_printed and
    c1_printed are the rho = 0 closed forms written directly in delta2k
    (equal to c0/c1 at rho = 0, also +inf past delta2k = sqrt(2) - 1). All
    four are evaluated in extended precision before the cast to float64;
    in plain float64 the two c0 forms drift apart by a few 1e-12.
    """

    delta2k: float
    rho: float
    alpha: float
    beta: float
    admissible: bool
    c0: float
    c1: float
    c0_printed: float
    c1_printed: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "delta2k": self.delta2k,
                "rho": self.rho,
                "alpha": self.alpha,
                "beta": self.beta,
                "admissible": self.admissible,
                "c0": self.c0,
                "c1": self.c1,
                "c0_printed": self.c0_printed,
                "c1_printed": self.c1_printed,
            }
        )


def _orth(cols: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space, relative cutoff _TRIVIAL_TOL."""
    if cols.size == 0:
        return np.zeros((cols.shape[0], 0))
    u, sv, _ = np.linalg.svd(cols, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros((cols.shape[0], 0))
    rank = int(np.sum(sv > _TRIVIAL_TOL * sv[0]))
    return u[:, :rank]


def _support_extremes(
    support: tuple[int, ...],
    a_cols: np.ndarray,
    pinv: np.ndarray,
    phi: np.ndarray,
    d: np.ndarray,
) -> tuple[float, float]:
    """(lower, upper) eigenvalue extremes for one support.

    lower: lambda_min of (A_Lambda)^T A_Lambda with A = Phi D^+.
    upper: lambda_max of the pencil (B^T Phi^T Phi B, B^T D^T D B) with
    B an orthonormal basis of D^+[:, Lambda], solved by Cholesky whitening
    of the metric Gram.
    """
    idx = list(support)
    asub = a_cols[:, idx]
    lower = float(np.linalg.eigvalsh(asub.T @ asub)[0])

    basis = _orth(pinv[:, idx])
    if basis.shape[1] == 0:
        # degenerate support (zero pseudoinverse columns); the mask side
        # still contributes, the image side is vacuous
        return lower, lower
    pb = phi @ basis
    db = d @ basis
    metric = db.T @ db
    if np.linalg.eigvalsh(metric)[0] <= _PD_TOL:
        raise np.linalg.LinAlgError(
            "chunk-subspace metric lost positive definiteness; the analysis "
            "operator is numerically rank deficient on this support"
        )
    chol = np.linalg.cholesky(metric)
    w = np.linalg.solve(chol, pb.T @ pb)
    w = np.linalg.solve(chol, w.T)
    upper = float(np.linalg.eigvalsh(w)[-1])
    return lower, upper


def _colex_supports(p: int, k: int):
    """All size-k supports in colexicographic order (last index varies
    slowest). Deterministic witness ordering depends on this."""
    return sorted(combinations(range(p), k), key=lambda s: s[::-1])


def _scan_supports(
    supports,
    phi_e: np.ndarray,
    dictionary: Dictionary,
    k: int,
    method: str,
    trials: int,
) -> GripReport:
    pinv = dictionary.pinv()
    a_cols = phi_e @ pinv
    d_e = dictionary.entries

    best_delta = -math.inf
    best_support: tuple[int, ...] | None = None
    lo_min = math.inf
    hi_max = -math.inf
    for sup in supports:
        lower, upper = _support_extremes(sup, a_cols, pinv, phi_e, d_e)
        lo_min = min(lo_min, lower)
        hi_max = max(hi_max, upper)
        delta = max(upper - 1.0, 1.0 - lower)
        if delta > best_delta:  # strict: first attaining support wins ties
            best_delta = delta
            best_support = sup
    if best_support is None:
        raise ValueError("no supports evaluated")
    return GripReport(
        k=k,
        delta=float(best_delta),
        method=method,
        trials=trials,
        worst_support=SupportSet(best_support, dictionary.p),
        eigen_range=(float(lo_min), float(hi_max)),
    )


def _check_delta_args(phi_e: np.ndarray, dictionary: Dictionary, k: int) -> None:
    if phi_e.shape[1] != dictionary.n:
        raise ValueError("sensing matrix and dictionary disagree on n")
    if not 1 <= k <= dictionary.p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={dictionary.p}")


def delta_exact(
    phi,
    dictionary: Dictionary,
    k: int,
    *,
    max_supports: int = DEFAULT_MAX_SUPPORTS,
) -> GripReport:
    """Exact delta_k by exhaustive support enumeration.

    Raises BudgetExceededError when C(p, k) > max_supports rather than
    silently degrading to sampling; callers choose the fallback.
    """
    phi_e = sensing_entries(phi)
    _check_delta_args(phi_e, dictionary, k)
    count = math.comb(dictionary.p, k)
    if count > max_supports:
        raise BudgetExceededError(
            f"C({dictionary.p}, {k}) = {count} supports exceeds budget {max_supports}"
        )
    return _scan_supports(
        _colex_supports(dictionary.p, k), phi_e, dictionary, k, "exact", 0
    )


def delta_monte_carlo(
    phi,
    dictionary: Dictionary,
    k: int,
    trials: int,
    seed: int | None = None,
) -> GripReport:
    """Sampled lower estimate of delta_k over `trials` uniform supports.

    Always <= the exact value since it scans a subset of the same support
    family. When trials >= C(p, k) the scan switches to full enumeration
    and the estimate equals the exact constant.
    """
    phi_e = sensing_entries(phi)
    _check_delta_args(phi_e, dictionary, k)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = dictionary.p
    count = math.comb(p, k)
    if trials >= count:
        supports = _colex_supports(p, k)
        return _scan_supports(supports, phi_e, dictionary, k, "monte-carlo", count)
    rng = np.random.default_rng(seed)
    supports = [
        tuple(int(i) for i in np.sort(rng.choice(p, size=k, replace=False)))
        for _ in range(trials)
    ]
    return _scan_supports(supports, phi_e, dictionary, k, "monte-carlo", trials)


def rho_exact(
    dictionary: Dictionary,
    k: int,
    *,
    max_pairs: int = DEFAULT_MAX_PAIRS,
) -> RhoEstimate:
    """Exact rho_k: the worst cosine between chunk subspaces on disjoint
    size-k supports.

    For each support, the subspace is the span of the corresponding columns
    of P = D D^+ (the image of the chunk map inside range(D)); rho is the
    largest singular value of Q_i^T Q_j over all disjoint pairs, i.e. the
    cosine of the smallest principal angle. Zero for orthogonal D; always
    in [0, 1]. Requires 2k <= p so a disjoint pair exists. Ties report the
    colexicographically smallest pair.
    """
    if not 1 <= k <= dictionary.p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={dictionary.p}")
    if 2 * k > dictionary.p:
        raise ValueError(f"disjoint pairs need 2k <= p, got k={k}, p={dictionary.p}")
    p = dictionary.p
    supports = _colex_supports(p, k)
    n_pairs = sum(
        1
        for i, si in enumerate(supports)
        for sj in supports[i + 1 :]
        if not set(si) & set(sj)
    )
    if n_pairs > max_pairs:
        raise BudgetExceededError(
            f"{n_pairs} disjoint pairs exceed budget {max_pairs}"
        )

    proj = dictionary.entries @ dictionary.pinv()
    bases = [_orth(proj[:, list(s)]) for s in supports]

    best = -1.0
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    for i, si in enumerate(supports):
        bi = bases[i]
        if bi.shape[1] == 0:
            continue
        for j in range(i + 1, len(supports)):
            sj = supports[j]
            if set(si) & set(sj):
                continue
            bj = bases[j]
            if bj.shape[1] == 0:
                continue
            s = np.linalg.svd(bi.T @ bj, compute_uv=False)
            top = float(s[0]) if s.size else 0.0
            if top > best:
                best = top
                witness = (si, sj)
    if witness is None:
        raise ValueError("no admissible disjoint pair (all chunk subspaces trivial)")
    best = min(max(best, 0.0), 1.0)  # clip cosine roundoff
    return RhoEstimate(
        k=k,
        rho=best,
        method="exact",
        witness=(SupportSet(witness[0], p), SupportSet(witness[1], p)),
    )


def bound_constants(delta2k: float, rho: float = 0.0) -> BoundConstants:
    """Recovery-bound constants at a given (delta2k, rho).

    Requires 0 <= delta2k < 1 and rho >= 0 (the bounds are hypotheses,
    not outputs). Evaluation runs in numpy longdouble: the proof-form and
    printed-form expressions for c0 agree exactly there after the cast,
    while float64 evaluation splits them by up to ~3e-12.
    """
    if not 0.0 <= delta2k < 1.0:
        raise ValueError(f"delta2k must lie in [0, 1), got {delta2k}")
    if not rho >= 0.0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    one = np.longdouble(1)
    two = np.longdouble(2)
    sqrt2 = np.sqrt(two)
    d = np.longdouble(delta2k)
    r = np.longdouble(rho)

    alpha = sqrt2 * (d + r) / (one - d)
    beta = one / (one - d)
    admissible = bool(alpha < one)

    if admissible:
        c0 = two + (two + two) * alpha / (one - alpha)
        c1 = two * beta / (one - alpha)
    else:
        c0 = np.longdouble(np.inf)
        c1 = np.longdouble(np.inf)

    denom = one - (one + sqrt2) * d
    if denom > 0:
        c0_printed = two * (one - (one - sqrt2) * d) / denom
        c1_printed = two / denom
    else:
        c0_printed = np.longdouble(np.inf)
        c1_printed = np.longdouble(np.inf)

    return BoundConstants(
        delta2k=float(delta2k),
        rho=float(rho),
        alpha=float(alpha),
        beta=float(beta),
        admissible=admissible,
        c0=float(c0),
        c1=float(c1),
        c0_printed=float(c0_printed),
        c1_printed=float(c1_printed),
    )
