"""Numerical checkers for the recovery bounds.

Each checker evaluates one inequality on concrete data, reporting lhs,
rhs and slack = rhs - lhs, so a nonnegative slack is a verified instance
and a negative slack beyond roundoff falsifies the implementation (or the
constants fed to it). Reports with hypothesis_ok=False are informational:
the inequality's hypotheses did not hold, so nothing is claimed either way.

The three facts checked:

  * cross-chunk correlation (check_corollary1): for disjoint-support
    pseudoinverse chunks h_i, h_j,
        |<Phi h_i, Phi h_j>| <= (delta_2k + rho_k) ||D h_i||_2 ||D h_j||_2.

  * masked-image lower bound (check_corollary2): for any h and any head
    support of size <= k, with Lambda the head plus the next-largest k
    coordinates of Dh,
        ||(Dh)_Lambda||_2 <= alpha ||(Dh)_head^c||_1 / sqrt(k)
                             + beta |<Phi h_Lambda, Phi h>| / ||(Dh)_Lambda||_2
    where h_Lambda = D^+ (Dh masked on Lambda).

  * recovery error (check_theorem1): for x_hat with
    ||D x_hat||_1 <= ||D x||_1 and admissible constants,
        ||D(x_hat - x)||_2 <= c0 sigma_k(x) / sqrt(k)
                              + c1 |<Phi h_Lambda, Phi h>| / ||(Dh)_Lambda||_2.

The head-complement l1 tail in corollary 2 follows the derivation that
yields it; the tighter head-only variant is falsified by random
orthogonal instances, so it is not what gets checked.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .grip import (
    DEFAULT_MAX_PAIRS,
    DEFAULT_MAX_SUPPORTS,
    BoundConstants,
    bound_constants,
    delta_exact,
    rho_exact,
)
from .model import Dictionary, SupportSet, chunk_decompose, sensing_entries, sigma_k, top_k_support

__all__ = [
    "BoundReport",
    "check_corollary1",
    "check_corollary2",
    "check_theorem1",
]

_ZERO_TOL = 1e-14     # below this, treat vectors/denominators as exactly zero
_DECOMP_TOL = 1e-8    # chunk reassembly residual allowed, relative


@dataclass(frozen=True)
class BoundReport:
    """One evaluated inequality. witness carries enough of the instance
    (supports, norms, constants inputs) to rebuild the two sides."""

    which: str
    lhs: float
    rhs: float
    slack: float
    hypothesis_ok: bool
    constants_used: BoundConstants | None
    witness: dict

    def to_json(self) -> str:
        const = None
        if self.constants_used is not None:
            const = json.loads(self.constants_used.to_json())
        return json.dumps(
            {
                "which": self.which,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "slack": self.slack,
                "hypothesis_ok": self.hypothesis_ok,
                "constants_used": const,
                "witness": self.witness,
            }
        )


def _resolve_constants(
    phi,
    dictionary: Dictionary,
    k: int,
    delta2k: float | None,
    rho: float | None,
    max_supports: int,
    max_pairs: int,
) -> tuple[float, float]:
    """Fill in exact delta_{2k} and rho_k when the caller did not supply
    certified values of their own."""
    if delta2k is None:
        delta2k = delta_exact(phi, dictionary, 2 * k, max_supports=max_supports).delta
    if rho is None:
        rho = rho_exact(dictionary, k, max_pairs=max_pairs).rho
    if not delta2k >= 0.0:
        raise ValueError(f"delta2k must be >= 0, got {delta2k}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    return float(delta2k), float(rho)


def check_corollary1(
    phi,
    dictionary: Dictionary,
    k: int,
    chunk_i: tuple[SupportSet, np.ndarray],
    chunk_j: tuple[SupportSet, np.ndarray],
    *,
    delta2k: float | None = None,
    rho: float | None = None,
    max_supports: int = DEFAULT_MAX_SUPPORTS,
    max_pairs: int = DEFAULT_MAX_PAIRS,
) -> BoundReport:
    """Cross-chunk correlation bound on two disjoint-support chunks.

    chunk_i / chunk_j are (support, vector) pairs with vectors in the
    pseudoinverse-chunk subspace of their support (as produced by
    chunk_decompose). Norms on the rhs are true analysis-image norms
    ||D h||_2, which for a chunk h = D^+ z equals the norm of the
    projection of z onto range(D), not ||z||_2.

    delta >= 1 is reported (hypothesis_ok=False, constants_used=None)
    rather than raised: the two sides stay well defined.
    """
    sup_i, h_i = chunk_i
    sup_j, h_j = chunk_j
    if sup_i.p != dictionary.p or sup_j.p != dictionary.p:
        raise ValueError("chunk supports index the wrong number of rows")
    if sup_i.size > k or sup_j.size > k:
        raise ValueError(f"chunk supports must have size <= k = {k}")
    if not sup_i.disjoint_from(sup_j):
        raise ValueError(f"chunk supports overlap: {sup_i.indices} vs {sup_j.indices}")
    h_i = np.asarray(h_i, dtype=np.float64)
    h_j = np.asarray(h_j, dtype=np.float64)

    delta2k, rho = _resolve_constants(
        phi, dictionary, k, delta2k, rho, max_supports, max_pairs
    )
    d = dictionary.entries
    f = sensing_entries(phi)
    lhs = abs(float((f @ h_i) @ (f @ h_j)))
    norm_i = float(np.linalg.norm(d @ h_i))
    norm_j = float(np.linalg.norm(d @ h_j))
    rhs = (delta2k + rho) * norm_i * norm_j

    hypothesis_ok = delta2k < 1.0
    constants = bound_constants(delta2k, rho) if hypothesis_ok else None
    witness = {
        "k": k,
        "support_i": list(sup_i.indices),
        "support_j": list(sup_j.indices),
        "delta2k": delta2k,
        "rho": rho,
        "image_norm_i": norm_i,
        "image_norm_j": norm_j,
    }
    return BoundReport(
        which="corollary1",
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        hypothesis_ok=hypothesis_ok,
        constants_used=constants,
        witness=witness,
    )


def _masked_inner_term(
    f: np.ndarray,
    pinv: np.ndarray,
    u: np.ndarray,
    mask_idx: list[int],
    h: np.ndarray,
) -> tuple[float, float, bool]:
    """(inner term, mask norm, degenerate flag) for the shared rhs term
    |<Phi h_Lambda, Phi h>| / ||(Dh)_Lambda||_2."""
    z = np.zeros(u.shape[0])
    z[mask_idx] = u[mask_idx]
    mask_norm = float(np.linalg.norm(z))
    h_mask = pinv @ z
    raw = abs(float((f @ h_mask) @ (f @ h)))
    if mask_norm <= _ZERO_TOL * max(1.0, float(np.linalg.norm(u))):
        # 0/0: the masked image vanished; the term is 0 unless the
        # correlation somehow did not, which we flag instead of dividing
        return (0.0, mask_norm, raw > _ZERO_TOL)
    return (raw / mask_norm, mask_norm, False)


def check_corollary2(
    phi,
    dictionary: Dictionary,
    k: int,
    h: np.ndarray,
    head: SupportSet,
    *,
    delta2k: float | None = None,
    rho: float | None = None,
    max_supports: int = DEFAULT_MAX_SUPPORTS,
    max_pairs: int = DEFAULT_MAX_PAIRS,
) -> BoundReport:
    """Masked-image lower bound for an arbitrary direction h.

    Raises on zero h and on delta_2k >= 1 (beta is undefined there, so no
    informational report is possible).
    """
    if head.p != dictionary.p:
        raise ValueError("head support indexes the wrong number of rows")
    if head.size > k:
        raise ValueError(f"head support must have size <= k = {k}")
    h = np.asarray(h, dtype=np.float64)
    if float(np.linalg.norm(h)) <= _ZERO_TOL:
        raise ValueError("h is zero; the bound is vacuous")

    delta2k, rho = _resolve_constants(
        phi, dictionary, k, delta2k, rho, max_supports, max_pairs
    )
    if delta2k >= 1.0:
        raise ValueError(
            f"delta2k = {delta2k:.6f} >= 1: the bound's constants are undefined"
        )
    constants = bound_constants(delta2k, rho)

    d = dictionary.entries
    f = sensing_entries(phi)
    pinv = dictionary.pinv()
    u = d @ h

    decomp = chunk_decompose(h, dictionary, k, head)
    if len(decomp.chunks) > 1:
        lam1_idx = list(decomp.chunks[1][0].indices)
    else:
        lam1_idx = []
    mask_idx = list(head.indices) + lam1_idx

    lhs_z = np.zeros(dictionary.p)
    lhs_z[mask_idx] = u[mask_idx]
    lhs = float(np.linalg.norm(lhs_z))

    head_set = set(head.indices)
    tail = float(sum(abs(u[i]) for i in range(dictionary.p) if i not in head_set))
    inner, mask_norm, degenerate = _masked_inner_term(f, pinv, u, mask_idx, h)
    rhs = constants.alpha * tail / math.sqrt(k) + constants.beta * inner

    hypothesis_ok = (
        not degenerate
        and decomp.residual_norm <= _DECOMP_TOL * max(1.0, float(np.linalg.norm(h)))
    )
    witness = {
        "k": k,
        "head": list(head.indices),
        "next_block": lam1_idx,
        "delta2k": delta2k,
        "rho": rho,
        "tail_l1": tail,
        "inner_term": inner,
        "mask_norm": mask_norm,
        "degenerate": degenerate,
    }
    return BoundReport(
        which="corollary2",
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        hypothesis_ok=hypothesis_ok,
        constants_used=constants,
        witness=witness,
    )


def check_theorem1(
    phi,
    dictionary: Dictionary,
    k: int,
    x: np.ndarray,
    x_hat: np.ndarray,
    *,
    delta2k: float | None = None,
    rho: float | None = None,
    max_supports: int = DEFAULT_MAX_SUPPORTS,
    max_pairs: int = DEFAULT_MAX_PAIRS,
) -> BoundReport:
    """Recovery-error bound for a candidate minimizer x_hat against truth x.

    The l1 hypothesis ||D x_hat||_1 <= ||D x||_1 is checked with an
    additive tolerance 1e-8 max(1, ||D x||_1); failure downgrades the
    report to hypothesis_ok=False rather than raising, since solvers
    can legitimately return slightly suboptimal points. Inadmissible
    constants (alpha >= 1, infinite c0/c1) raise: the theorem does not
    apply and no finite report exists. rho=None uses the exact rho_k;
    passing rho=0.0 reproduces the printed constants, which is equally
    sound whenever the dictionary's disjoint chunk subspaces are
    orthogonal (rho_k = 0, e.g. any orthogonal dictionary).

    x_hat == x is reported as trivially satisfied (lhs = 0, inner term 0).
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != (dictionary.n,) or x_hat.shape != (dictionary.n,):
        raise ValueError(f"x and x_hat must have shape ({dictionary.n},)")
    if not 1 <= k <= dictionary.p:
        raise ValueError(f"need 1 <= k <= p, got k={k}")

    delta2k, rho = _resolve_constants(
        phi, dictionary, k, delta2k, rho, max_supports, max_pairs
    )
    if delta2k >= 1.0:
        raise ValueError(
            f"delta2k = {delta2k:.6f} >= 1: the bound's constants are undefined"
        )
    constants = bound_constants(delta2k, rho)
    if not constants.admissible:
        raise ValueError(
            f"constants not admissible at delta2k={delta2k:.6f}, rho={rho:.6f} "
            f"(alpha = {constants.alpha:.6f} >= 1); the theorem does not apply"
        )

    d = dictionary.entries
    f = sensing_entries(phi)
    dx = d @ x
    l1_x = float(np.sum(np.abs(dx)))
    l1_hat = float(np.sum(np.abs(d @ x_hat)))
    num_tol = 1e-8 * max(1.0, l1_x)
    l1_hypothesis = l1_hat <= l1_x + num_tol

    tail = sigma_k(x, dictionary, k)
    h = x_hat - x
    trivial = float(np.linalg.norm(h)) <= _ZERO_TOL * max(1.0, float(np.linalg.norm(x)))

    if trivial:
        lhs = 0.0
        inner = 0.0
        mask_norm = 0.0
        degenerate = False
        head = top_k_support(dx, k)
        lam1_idx: list[int] = []
    else:
        pinv = dictionary.pinv()
        u = d @ h
        head = top_k_support(dx, k)
        decomp = chunk_decompose(h, dictionary, k, head)
        if len(decomp.chunks) > 1:
            lam1_idx = list(decomp.chunks[1][0].indices)
        else:
            lam1_idx = []
        mask_idx = list(head.indices) + lam1_idx
        lhs = float(np.linalg.norm(u))
        inner, mask_norm, degenerate = _masked_inner_term(f, pinv, u, mask_idx, h)

    rhs = constants.c0 * tail / math.sqrt(k) + constants.c1 * inner
    hypothesis_ok = l1_hypothesis and not degenerate
    witness = {
        "k": k,
        "head": list(head.indices),
        "next_block": lam1_idx,
        "delta2k": delta2k,
        "rho": rho,
        "sigma_k": tail,
        "l1_truth": l1_x,
        "l1_candidate": l1_hat,
        "inner_term": inner,
        "mask_norm": mask_norm,
        "error_l2": float(np.linalg.norm(h)),
        "trivial": trivial,
        "degenerate": degenerate,
    }
    return BoundReport(
        which="theorem1",
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        hypothesis_ok=hypothesis_ok,
        constants_used=constants,
        witness=witness,
    )
