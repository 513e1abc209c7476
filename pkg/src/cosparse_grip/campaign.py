"""Seeded experiment campaigns: config parsing, dispatch, persistence.

A campaign is a JSON config naming one experiment plus its dimensions,
operator kinds, constraint, trial count and seed. Per-trial seeds are the
splitmix64 finalizer applied to (campaign seed, trial index), so trials
are order-independent and the whole run is reproducible to the byte from
(config, seed) alone. Emitted artifacts: results.csv (17-significant-digit
floats, trailing `# summary:` comment block), results.jsonl (one row
object per line) and config_echo.json (the parsed config with defaults
materialized). wall_time is recorded on the result but never written, so
re-runs stay byte-identical.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grip import (
    DEFAULT_MAX_PAIRS,
    DEFAULT_MAX_SUPPORTS,
    bound_constants,
    delta_exact,
    delta_monte_carlo,
    rho_exact,
)
from .model import (
    DICTIONARY_KINDS,
    Dictionary,
    SensingMatrix,
    SupportSet,
    load_dictionary_csv,
    load_sensing_csv,
    make_dictionary,
    make_sensing_matrix,
    sample_cosparse_signal,
)
from .solvers import (
    ConstraintSpec,
    SolverOptions,
    solve_analysis_l1,
    solve_lp_certified,
    solve_synthesis_l1,
)
from .verify import check_corollary1, check_corollary2, check_theorem1

__all__ = [
    "EXPERIMENTS",
    "SUCCESS_TOL",
    "ConfigError",
    "CampaignTrialError",
    "Budget",
    "ExperimentConfig",
    "CampaignResult",
    "trial_seed",
    "run",
    "emit_csv",
    "emit_jsonl",
    "write_outputs",
]

EXPERIMENTS = (
    "grip",
    "rho",
    "solve",
    "verify-c1",
    "verify-c2",
    "verify-t1",
    "phase",
    "p1p2",
)

SUCCESS_TOL = 1e-5        # ||x_hat - x||_2 below this counts as exact recovery
_CONFIG_KINDS = tuple(k for k in DICTIONARY_KINDS if k != "user-supplied")
_MATRIX_KINDS = ("gaussian", "bernoulli")
_RHO_MODES = ("exact", "printed")

_MASK64 = (1 << 64) - 1
_INSTANCE_TAG = 1 << 40   # keeps instance seed stream clear of trial indices


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the violation."""


class CampaignTrialError(RuntimeError):
    """A trial failed. Carries the completed prefix of rows so callers
    can flush partial results before aborting."""

    def __init__(self, message: str, partial: "CampaignResult"):
        super().__init__(message)
        self.partial = partial


def trial_seed(campaign_seed: int, index: int) -> int:
    """splitmix64 finalizer on campaign_seed advanced by index steps.

    Decorrelates per-trial RNG streams while keeping them a pure function
    of (seed, index), hence parallelizable and order-independent.
    """
    x = (campaign_seed + 0x9E3779B97F4A7C15 * (index + 1)) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class Budget:
    """Enumeration and iteration ceilings for one campaign."""

    max_supports: int = DEFAULT_MAX_SUPPORTS
    max_pairs: int = DEFAULT_MAX_PAIRS
    max_iters: int = 200000
    mc_trials: int = 200  # sample count when exact enumeration is over budget

    def __post_init__(self):
        for name in ("max_supports", "max_pairs", "max_iters", "mc_trials"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"budget.{name} must be a positive integer, got {v!r}")


def _require_keys(doc: dict, allowed: dict, where: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _as_int(doc: dict, key: str, where: str) -> int:
    v = doc[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """One campaign, fully validated at construction.

    instances pools several (dictionary, sensing) draws inside one
    verify-* campaign, amortizing the exact constants across trials.
    m_grid is the undersampling sweep of the phase experiment (defaults
    to 2..n, endpoint included; m = n is allowed there and only there).
    rho_mode chooses between the exact cross-term and the printed-form
    rho = 0 constants in verify-* experiments.
    """

    experiment: str
    m: int
    n: int
    p: int
    k: int
    dictionary_kind: str
    matrix_kind: str
    constraint_kind: str
    epsilon: float
    lam: float
    trials: int
    seed: int
    output_path: str | None = None
    budget: Budget = field(default_factory=Budget)
    instances: int = 1
    m_grid: tuple[int, ...] | None = None
    rho_mode: str = "exact"
    dictionary_path: str | None = None
    matrix_path: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for name in ("m", "n", "p", "k", "trials", "instances"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.p < self.n:
            raise ConfigError(f"dictionary needs p >= n, got p={self.p}, n={self.n}")
        if self.experiment != "phase" and self.m >= self.n:
            raise ConfigError(f"sensing matrix needs m < n, got m={self.m}, n={self.n}")
        if self.dictionary_path is not None:
            if self.dictionary_kind != "user-supplied":
                raise ConfigError("dictionary_path requires dictionary_kind \"user-supplied\"")
        elif self.dictionary_kind not in _CONFIG_KINDS:
            raise ConfigError(
                f"dictionary_kind must be one of {_CONFIG_KINDS} "
                "(\"user-supplied\" needs a dictionary_path)"
            )
        if self.dictionary_kind in ("identity", "orthogonal", "finite-difference") and self.p != self.n:
            raise ConfigError(f"{self.dictionary_kind} dictionary requires p == n")
        if self.matrix_path is not None:
            if self.experiment == "phase":
                raise ConfigError("phase sweeps m itself; matrix_path is not allowed")
            if self.matrix_kind != "user-supplied":
                raise ConfigError("matrix_path requires matrix_kind \"user-supplied\"")
        elif self.matrix_kind not in _MATRIX_KINDS:
            raise ConfigError(
                f"matrix_kind must be one of {_MATRIX_KINDS} "
                "(\"user-supplied\" needs a matrix_path)"
            )
        if (self.dictionary_path or self.matrix_path) and self.instances != 1:
            raise ConfigError("operator files fix the instance; instances must be 1")
        if self.constraint_kind not in ("equality", "l2-ball", "dantzig"):
            raise ConfigError(f"unknown constraint kind {self.constraint_kind!r}")
        if self.constraint_kind == "l2-ball" and not self.epsilon > 0:
            raise ConfigError("l2-ball constraint requires epsilon > 0")
        if self.constraint_kind == "dantzig" and not self.lam >= 0:
            raise ConfigError("dantzig constraint requires lambda >= 0")
        if self.rho_mode not in _RHO_MODES:
            raise ConfigError(f"rho_mode must be one of {_RHO_MODES}")
        if not 1 <= self.k <= self.p:
            raise ConfigError(f"need 1 <= k <= p, got k={self.k}, p={self.p}")
        if self.experiment in ("solve", "phase", "p1p2", "verify-t1") and self.k >= self.p:
            raise ConfigError(f"signal sampling needs k < p, got k={self.k}, p={self.p}")
        if (
            self.experiment in ("solve", "phase", "p1p2")
            and self.p > self.n
            and self.k < self.p - self.n + 1
        ):
            # p - k generic analysis rows must leave a nontrivial null space
            raise ConfigError(
                f"a redundant operator admits no {self.k}-analysis-sparse signal: "
                f"need k >= p - n + 1 = {self.p - self.n + 1}"
            )
        if self.experiment in ("rho", "verify-c1", "verify-c2", "verify-t1") and 2 * self.k > self.p:
            raise ConfigError(f"disjoint support pairs need 2k <= p, got k={self.k}, p={self.p}")
        if self.experiment in ("p1p2",) and self.constraint_kind == "dantzig":
            raise ConfigError("p1p2 compares the first-order routes; dantzig is LP-only")
        if self.m_grid is not None:
            if self.experiment != "phase":
                raise ConfigError("m_grid is only meaningful for the phase experiment")
            grid = tuple(self.m_grid)
            if not grid:
                raise ConfigError("m_grid must be nonempty")
            for v in grid:
                if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= self.n:
                    raise ConfigError(f"m_grid entries must be integers in [1, n], got {v!r}")
            object.__setattr__(self, "m_grid", grid)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {
            "experiment": None, "dims": None, "k": None, "dictionary_kind": None,
            "matrix_kind": None, "constraint": None, "trials": None, "seed": None,
            "output_path": None, "budget": None, "instances": None, "m_grid": None,
            "rho_mode": None, "dictionary_path": None, "matrix_path": None,
        }
        _require_keys(doc, allowed, "config")
        for req in ("experiment", "dims", "k", "dictionary_kind", "matrix_kind", "trials", "seed"):
            if req not in doc:
                raise ConfigError(f"config is missing required key {req!r}")

        dims = doc["dims"]
        if not isinstance(dims, dict):
            raise ConfigError("dims must be an object with keys m, n, p")
        _require_keys(dims, {"m": None, "n": None, "p": None}, "dims")
        for req in ("m", "n", "p"):
            if req not in dims:
                raise ConfigError(f"dims is missing required key {req!r}")

        constraint = doc.get("constraint", {"kind": "equality"})
        if not isinstance(constraint, dict):
            raise ConfigError("constraint must be an object")
        _require_keys(constraint, {"kind": None, "epsilon": None, "lambda": None}, "constraint")
        ckind = constraint.get("kind", "equality")
        epsilon = constraint.get("epsilon", 0.0)
        lam = constraint.get("lambda", 0.0)
        for name, v in (("epsilon", epsilon), ("lambda", lam)):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"constraint.{name} must be a number, got {v!r}")

        budget_doc = doc.get("budget", {})
        if not isinstance(budget_doc, dict):
            raise ConfigError("budget must be an object")
        _require_keys(
            budget_doc,
            {"max_supports": None, "max_pairs": None, "max_iters": None, "mc_trials": None},
            "budget",
        )
        budget = Budget(**budget_doc)

        output_path = doc.get("output_path")
        if output_path is not None and not isinstance(output_path, str):
            raise ConfigError(f"output_path must be a string, got {output_path!r}")
        paths = {}
        for key in ("dictionary_path", "matrix_path"):
            v = doc.get(key)
            if v is not None and not isinstance(v, str):
                raise ConfigError(f"{key} must be a string, got {v!r}")
            paths[key] = v
        m_grid = doc.get("m_grid")
        if m_grid is not None:
            if not isinstance(m_grid, list):
                raise ConfigError("m_grid must be a list of integers")
            m_grid = tuple(m_grid)
        rho_mode = doc.get("rho_mode", "exact")
        if not isinstance(rho_mode, str):
            raise ConfigError(f"rho_mode must be a string, got {rho_mode!r}")
        instances = doc.get("instances", 1)
        if not isinstance(instances, int) or isinstance(instances, bool):
            raise ConfigError(f"instances must be an integer, got {instances!r}")
        if not isinstance(doc["experiment"], str):
            raise ConfigError("experiment must be a string")
        if not isinstance(doc["dictionary_kind"], str) or not isinstance(doc["matrix_kind"], str):
            raise ConfigError("dictionary_kind and matrix_kind must be strings")
        if not isinstance(ckind, str):
            raise ConfigError("constraint.kind must be a string")

        return cls(
            experiment=doc["experiment"],
            m=_as_int(dims, "m", "dims"),
            n=_as_int(dims, "n", "dims"),
            p=_as_int(dims, "p", "dims"),
            k=_as_int(doc, "k", "config"),
            dictionary_kind=doc["dictionary_kind"],
            matrix_kind=doc["matrix_kind"],
            constraint_kind=ckind,
            epsilon=float(epsilon),
            lam=float(lam),
            trials=_as_int(doc, "trials", "config"),
            seed=_as_int(doc, "seed", "config"),
            output_path=output_path,
            budget=budget,
            instances=instances,
            m_grid=m_grid,
            rho_mode=rho_mode,
            dictionary_path=paths["dictionary_path"],
            matrix_path=paths["matrix_path"],
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_json_dict(self) -> dict:
        doc = {
            "experiment": self.experiment,
            "dims": {"m": self.m, "n": self.n, "p": self.p},
            "k": self.k,
            "dictionary_kind": self.dictionary_kind,
            "matrix_kind": self.matrix_kind,
            "constraint": {
                "kind": self.constraint_kind,
                "epsilon": self.epsilon,
                "lambda": self.lam,
            },
            "trials": self.trials,
            "seed": self.seed,
            "output_path": self.output_path,
            "budget": {
                "max_supports": self.budget.max_supports,
                "max_pairs": self.budget.max_pairs,
                "max_iters": self.budget.max_iters,
                "mc_trials": self.budget.mc_trials,
            },
            "instances": self.instances,
            "m_grid": list(self.m_grid) if self.m_grid is not None else None,
            "rho_mode": self.rho_mode,
            "dictionary_path": self.dictionary_path,
            "matrix_path": self.matrix_path,
        }
        return doc


@dataclass(frozen=True)
class CampaignResult:
    config: ExperimentConfig
    rows: tuple[dict, ...]
    summary: dict
    wall_time: float


# ---------------------------------------------------------------------------
# per-experiment machinery


def _solver_options(cfg: ExperimentConfig) -> SolverOptions:
    return SolverOptions(max_iters=cfg.budget.max_iters)


_Ops = tuple[Dictionary | None, SensingMatrix | None]


def _load_operators(cfg: ExperimentConfig) -> _Ops:
    """Load config-referenced operator files once per campaign; shapes
    must agree with the declared dims."""
    d = phi = None
    if cfg.dictionary_path is not None:
        try:
            d = load_dictionary_csv(cfg.dictionary_path)
        except (OSError, ValueError) as err:
            raise ConfigError(f"dictionary_path {cfg.dictionary_path!r}: {err}") from err
        if d.entries.shape != (cfg.p, cfg.n):
            raise ConfigError(
                f"dictionary_path has shape {d.entries.shape}, "
                f"config dims say (p, n) = ({cfg.p}, {cfg.n})"
            )
    if cfg.matrix_path is not None:
        try:
            phi = load_sensing_csv(cfg.matrix_path)
        except (OSError, ValueError) as err:
            raise ConfigError(f"matrix_path {cfg.matrix_path!r}: {err}") from err
        if phi.entries.shape != (cfg.m, cfg.n):
            raise ConfigError(
                f"matrix_path has shape {phi.entries.shape}, "
                f"config dims say (m, n) = ({cfg.m}, {cfg.n})"
            )
    return d, phi


def _make_operators(cfg: ExperimentConfig, seed: int, ops: _Ops) -> tuple[Dictionary, SensingMatrix]:
    d = ops[0] if ops[0] is not None else make_dictionary(
        cfg.dictionary_kind, cfg.p, cfg.n, trial_seed(seed, 0))
    phi = ops[1] if ops[1] is not None else make_sensing_matrix(
        cfg.matrix_kind, cfg.m, cfg.n, trial_seed(seed, 1))
    return d, phi


def _constraint_for(cfg: ExperimentConfig, phi_entries: np.ndarray, x: np.ndarray, rng: np.random.Generator) -> ConstraintSpec:
    """Build B(y) so that the ground truth x is feasible: exact data for
    equality/dantzig, half-radius perturbed data for the ball."""
    y = phi_entries @ x
    if cfg.constraint_kind == "equality":
        return ConstraintSpec("equality", y)
    if cfg.constraint_kind == "l2-ball":
        noise = rng.standard_normal(y.shape[0])
        nrm = float(np.linalg.norm(noise))
        if nrm > 0:
            y = y + noise * (0.5 * cfg.epsilon / nrm)
        return ConstraintSpec("l2-ball", y, epsilon=cfg.epsilon)
    return ConstraintSpec("dantzig", y, lam=cfg.lam)


def _solve_for(cfg: ExperimentConfig, phi, dictionary: Dictionary, constraint: ConstraintSpec):
    if constraint.kind == "dantzig":
        return solve_lp_certified(phi, dictionary, constraint)
    return solve_analysis_l1(phi, dictionary, constraint, _solver_options(cfg))


_Trial = tuple[dict, dict]  # (emitted row, non-emitted stats e.g. convergence)


def _grip_trial(cfg: ExperimentConfig, ops: _Ops, index: int, seed: int) -> _Trial:
    d, phi = _make_operators(cfg, seed, ops)
    count = math.comb(cfg.p, cfg.k)
    if count <= cfg.budget.max_supports:
        rep = delta_exact(phi, d, cfg.k, max_supports=cfg.budget.max_supports)
    else:
        rep = delta_monte_carlo(phi, d, cfg.k, cfg.budget.mc_trials, trial_seed(seed, 2))
    row = {
        "trial": index,
        "seed": seed,
        "delta": rep.delta,
        "method": rep.method,
        "eig_lo": rep.eigen_range[0],
        "eig_hi": rep.eigen_range[1],
    }
    return row, {}


def _rho_trial(cfg: ExperimentConfig, ops: _Ops, index: int, seed: int) -> _Trial:
    d = ops[0] if ops[0] is not None else make_dictionary(
        cfg.dictionary_kind, cfg.p, cfg.n, trial_seed(seed, 0))
    est = rho_exact(d, cfg.k, max_pairs=cfg.budget.max_pairs)
    return {"trial": index, "seed": seed, "rho": est.rho}, {}


def _solve_trial(cfg: ExperimentConfig, ops: _Ops, index: int, seed: int) -> _Trial:
    d, phi = _make_operators(cfg, seed, ops)
    x = sample_cosparse_signal(d, cfg.k, trial_seed(seed, 2))
    rng = np.random.default_rng(trial_seed(seed, 3))
    constraint = _constraint_for(cfg, phi.entries, x, rng)
    res = _solve_for(cfg, phi, d, constraint)
    err = float(np.linalg.norm(res.x_hat - x))
    row = {
        "trial": index,
        "seed": seed,
        "objective": res.objective,
        "iterations": res.iterations,
        "primal_residual": res.primal_residual,
        "dual_residual": res.dual_residual,
        "converged": res.converged,
        "err_l2": err,
        "success": err <= SUCCESS_TOL,
    }
    return row, {"converged": res.converged}


def _phase_cells(cfg: ExperimentConfig) -> tuple[int, ...]:
    return cfg.m_grid if cfg.m_grid is not None else tuple(range(2, cfg.n + 1))


def _phase_trial(cfg: ExperimentConfig, ops: _Ops, index: int, seed: int) -> _Trial:
    grid = _phase_cells(cfg)
    m = grid[index // cfg.trials]
    d = ops[0] if ops[0] is not None else make_dictionary(
        cfg.dictionary_kind, cfg.p, cfg.n, trial_seed(seed, 0))
    rng_phi = np.random.default_rng(trial_seed(seed, 1))
    if cfg.matrix_kind == "gaussian":
        phi_entries = rng_phi.standard_normal((m, cfg.n)) / math.sqrt(m)
    else:
        phi_entries = rng_phi.choice([-1.0, 1.0], size=(m, cfg.n)) / math.sqrt(m)
    # m = n is a legitimate endpoint of the sweep; SensingMatrix would
    # reject it, so the sweep passes raw entries throughout
    x = sample_cosparse_signal(d, cfg.k, trial_seed(seed, 2))
    constraint = ConstraintSpec("equality", phi_entries @ x)
    res = solve_analysis_l1(phi_entries, d, constraint, _solver_options(cfg))
    err = float(np.linalg.norm(res.x_hat - x))
    row = {
        "trial": index,
        "seed": seed,
        "m": m,
        "success": err <= SUCCESS_TOL,
        "err_l2": err,
        "objective": res.objective,
        "iterations": res.iterations,
    }
    return row, {"converged": res.converged}


def _p1p2_trial(cfg: ExperimentConfig, ops: _Ops, index: int, seed: int) -> _Trial:
    d, phi = _make_operators(cfg, seed, ops)
    x = sample_cosparse_signal(d, cfg.k, trial_seed(seed, 2))
    rng = np.random.default_rng(trial_seed(seed, 3))
    constraint = _constraint_for(cfg, phi.entries, x, rng)
    opts = _solver_options(cfg)
    res_analysis = solve_analysis_l1(phi, d, constraint, opts)
    res_synthesis = solve_synthesis_l1(phi, d, constraint, opts)
    dist = float(np.linalg.norm(res_analysis.x_hat - res_synthesis.x_hat))
    converged = res_analysis.converged and res_synthesis.converged
    row = {
        "trial": index,
        "seed": seed,
        "distance": dist,
        "objective_p1": res_synthesis.objective,
        "objective_p2": res_analysis.objective,
        "iterations_p1": res_synthesis.iterations,
        "iterations_p2": res_analysis.iterations,
        "converged": converged,
    }
    return row, {"converged": converged}


@dataclass(frozen=True)
class _VerifyInstance:
    dictionary: Dictionary
    phi: SensingMatrix
    delta2k: float
    rho: float


def _verify_pool(cfg: ExperimentConfig, ops: _Ops) -> list[_VerifyInstance]:
    """Instance pool with exact constants, shared across trials.

    delta is computed at order 2k (the order every checked bound uses) and
    rho at order k; rho_mode "printed" zeroes the cross term to reproduce
    the rho-free printed constants.
    """
    pool = []
    for i in range(cfg.instances):
        s = trial_seed(cfg.seed, _INSTANCE_TAG + i)
        d, phi = _make_operators(cfg, s, ops)
        delta = delta_exact(phi, d, 2 * cfg.k, max_supports=cfg.budget.max_supports).delta
        if cfg.rho_mode == "printed":
            rho = 0.0
        else:
            rho = rho_exact(d, cfg.k, max_pairs=cfg.budget.max_pairs).rho
        pool.append(_VerifyInstance(d, phi, delta, rho))
    return pool


def _num_tol(lhs: float, rhs: float) -> float:
    return 1e-8 * max(abs(lhs), abs(rhs), 1.0)


def _verify_c1_trial(cfg: ExperimentConfig, pool, index: int, seed: int) -> _Trial:
    inst = pool[index % len(pool)]
    d = inst.dictionary
    rng = np.random.default_rng(seed)
    picks = rng.choice(cfg.p, size=2 * cfg.k, replace=False)
    sup_i = SupportSet(tuple(int(v) for v in picks[: cfg.k]), cfg.p)
    sup_j = SupportSet(tuple(int(v) for v in picks[cfg.k :]), cfg.p)
    pinv = d.pinv()
    z_i = np.zeros(cfg.p)
    z_i[list(sup_i.indices)] = rng.standard_normal(cfg.k)
    z_j = np.zeros(cfg.p)
    z_j[list(sup_j.indices)] = rng.standard_normal(cfg.k)
    rep = check_corollary1(
        inst.phi, d, cfg.k, (sup_i, pinv @ z_i), (sup_j, pinv @ z_j),
        delta2k=inst.delta2k, rho=inst.rho,
    )
    row = {
        "trial": index,
        "seed": seed,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "slack": rep.slack,
        "hypothesis_ok": rep.hypothesis_ok,
        "delta2k": inst.delta2k,
        "rho": inst.rho,
    }
    return row, {}


def _verify_c2_trial(cfg: ExperimentConfig, pool, index: int, seed: int) -> _Trial:
    inst = pool[index % len(pool)]
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(cfg.n)
    h /= float(np.linalg.norm(h))
    head = SupportSet(tuple(int(v) for v in rng.choice(cfg.p, size=cfg.k, replace=False)), cfg.p)
    rep = check_corollary2(
        inst.phi, inst.dictionary, cfg.k, h, head,
        delta2k=inst.delta2k, rho=inst.rho,
    )
    row = {
        "trial": index,
        "seed": seed,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "slack": rep.slack,
        "hypothesis_ok": rep.hypothesis_ok,
        "delta2k": inst.delta2k,
        "rho": inst.rho,
    }
    return row, {}


def _compressible_signal(dictionary: Dictionary, seed: int, decay: float = 0.5) -> np.ndarray:
    """Unit-norm x whose analysis image has (approximately) geometrically
    decaying sorted magnitudes; exact geometric decay when D is orthogonal."""
    rng = np.random.default_rng(seed)
    p = dictionary.p
    profile = decay ** np.arange(p) * rng.choice([-1.0, 1.0], size=p)
    v = rng.permutation(profile)
    x = dictionary.pinv() @ v
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        raise ValueError("degenerate compressible draw")
    return x / nrm


def _verify_t1_trial(cfg: ExperimentConfig, pool, index: int, seed: int) -> _Trial:
    inst = pool[index % len(pool)]
    constants = bound_constants(inst.delta2k, inst.rho)
    x = _compressible_signal(inst.dictionary, trial_seed(seed, 2))
    rng = np.random.default_rng(trial_seed(seed, 3))
    constraint = _constraint_for(cfg, inst.phi.entries, x, rng)
    res = _solve_for(cfg, inst.phi, inst.dictionary, constraint)
    rep = check_theorem1(
        inst.phi, inst.dictionary, cfg.k, x, res.x_hat,
        delta2k=inst.delta2k, rho=inst.rho,
    )
    row = {
        "trial": index,
        "seed": seed,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "slack": rep.slack,
        "hypothesis_ok": rep.hypothesis_ok,
        "delta2k": inst.delta2k,
        "rho": inst.rho,
        "c0": constants.c0,
        "c1": constants.c1,
    }
    return row, {"converged": res.converged}


def _summarize(cfg: ExperimentConfig, rows: list[dict], metas: list[dict]) -> dict:
    exp = cfg.experiment
    summary: dict = {"trials": len(rows)}
    if not rows:
        return summary
    unconverged = sum(1 for m in metas if m.get("converged") is False)
    if exp == "grip":
        deltas = [r["delta"] for r in rows]
        summary["delta_mean"] = sum(deltas) / len(deltas)
        summary["delta_min"] = min(deltas)
        summary["delta_max"] = max(deltas)
    elif exp == "rho":
        rhos = [r["rho"] for r in rows]
        summary["rho_mean"] = sum(rhos) / len(rhos)
        summary["rho_min"] = min(rhos)
        summary["rho_max"] = max(rhos)
    elif exp in ("solve", "phase"):
        succ = [r["success"] for r in rows]
        summary["success_rate"] = sum(succ) / len(succ)
        errs = [r["err_l2"] for r in rows]
        summary["err_max"] = max(errs)
        summary["unconverged"] = unconverged
        if exp == "phase":
            for m in _phase_cells(cfg):
                cell = [r["success"] for r in rows if r["m"] == m]
                if cell:
                    summary[f"success_rate_m_{m}"] = sum(cell) / len(cell)
    elif exp == "p1p2":
        dists = [r["distance"] for r in rows]
        summary["distance_mean"] = sum(dists) / len(dists)
        summary["distance_max"] = max(dists)
        summary["unconverged"] = unconverged
    else:  # verify-*
        slacks = [r["slack"] for r in rows]
        summary["min_slack"] = min(slacks)
        summary["mean_slack"] = sum(slacks) / len(slacks)
        summary["violations"] = sum(
            1 for r in rows
            if r["hypothesis_ok"] and r["slack"] < -_num_tol(r["lhs"], r["rhs"])
        )
        summary["hypothesis_rate"] = sum(1 for r in rows if r["hypothesis_ok"]) / len(rows)
        if exp == "verify-t1":
            summary["unconverged"] = unconverged
    return summary


def _worker_count(explicit: int | None) -> int:
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get("COSPARSE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as err:
            raise ConfigError(f"COSPARSE_WORKERS must be an integer, got {env!r}") from err
    return 1


def run(config: ExperimentConfig, workers: int | None = None) -> CampaignResult:
    """Execute a campaign and aggregate its rows.

    Trials run in a thread pool of `workers` (default: COSPARSE_WORKERS or
    1); rows are ordered by trial index regardless of completion order. A
    failing trial raises CampaignTrialError carrying the completed prefix.
    """
    t0 = time.perf_counter()
    exp = config.experiment
    ops = _load_operators(config)

    if exp == "verify-c2" or exp == "verify-t1":
        # these bounds need delta < 1 (and t1 needs alpha < 1); probe the
        # pool up front so the failure is a named config-level diagnostic
        pool = _verify_pool(config, ops)
        for i, inst in enumerate(pool):
            if inst.delta2k >= 1.0:
                raise ConfigError(
                    f"instance {i}: exact delta_2k = {inst.delta2k:.4f} >= 1 at "
                    f"dims (m={config.m}, n={config.n}, p={config.p}), k={config.k}; "
                    f"the {exp} bound's hypothesis cannot hold"
                )
            if exp == "verify-t1" and not bound_constants(inst.delta2k, inst.rho).admissible:
                raise ConfigError(
                    f"instance {i}: constants inadmissible (alpha >= 1) at exact "
                    f"delta_2k = {inst.delta2k:.4f}, rho = {inst.rho:.4f}; "
                    "theorem-1 verification cannot run"
                )
    elif exp == "verify-c1":
        pool = _verify_pool(config, ops)
    else:
        pool = None

    if exp == "grip":
        fn = lambda i, s: _grip_trial(config, ops, i, s)
    elif exp == "rho":
        fn = lambda i, s: _rho_trial(config, ops, i, s)
    elif exp == "solve":
        fn = lambda i, s: _solve_trial(config, ops, i, s)
    elif exp == "phase":
        fn = lambda i, s: _phase_trial(config, ops, i, s)
    elif exp == "p1p2":
        fn = lambda i, s: _p1p2_trial(config, ops, i, s)
    elif exp == "verify-c1":
        fn = lambda i, s: _verify_c1_trial(config, pool, i, s)
    elif exp == "verify-c2":
        fn = lambda i, s: _verify_c2_trial(config, pool, i, s)
    else:
        fn = lambda i, s: _verify_t1_trial(config, pool, i, s)

    total = config.trials * len(_phase_cells(config)) if exp == "phase" else config.trials
    seeds = [trial_seed(config.seed, i) for i in range(total)]

    rows: list[dict] = []
    metas: list[dict] = []
    nworkers = _worker_count(workers)

    def guarded(i: int) -> _Trial:
        try:
            return fn(i, seeds[i])
        except Exception as err:
            raise _TrialFailure(i, seeds[i], err) from err

    try:
        if nworkers == 1:
            for i in range(total):
                row, meta = guarded(i)
                rows.append(row)
                metas.append(meta)
        else:
            with ThreadPoolExecutor(max_workers=nworkers) as pool_exec:
                for row, meta in pool_exec.map(guarded, range(total)):
                    rows.append(row)
                    metas.append(meta)
    except _TrialFailure as fail:
        partial = CampaignResult(
            config=config,
            rows=tuple(rows),
            summary=_summarize(config, rows, metas),
            wall_time=time.perf_counter() - t0,
        )
        raise CampaignTrialError(
            f"trial {fail.index} (seed {fail.seed}) failed: {fail.cause}", partial
        ) from fail.cause

    return CampaignResult(
        config=config,
        rows=tuple(rows),
        summary=_summarize(config, rows, metas),
        wall_time=time.perf_counter() - t0,
    )


class _TrialFailure(Exception):
    def __init__(self, index: int, seed: int, cause: Exception):
        super().__init__(str(cause))
        self.index = index
        self.seed = seed
        self.cause = cause


# ---------------------------------------------------------------------------
# persistence


def _fmt_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def emit_csv(result: CampaignResult, path) -> None:
    """Rows as CSV plus a trailing `# summary:` comment block; floats at
    17 significant digits; byte-deterministic for fixed (config, seed)."""
    lines = []
    if result.rows:
        cols = list(result.rows[0].keys())
        lines.append(",".join(cols))
        for row in result.rows:
            lines.append(",".join(_fmt_cell(row[c]) for c in cols))
    lines.append("# summary:")
    for key, val in result.summary.items():
        lines.append(f"# {key}={_fmt_cell(val)}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_jsonl(result: CampaignResult, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in result.rows:
            fh.write(json.dumps(row) + "\n")


def write_outputs(result: CampaignResult, out_dir) -> dict:
    """results.csv + results.jsonl + config_echo.json under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "results.csv",
        "jsonl": out / "results.jsonl",
        "config": out / "config_echo.json",
    }
    emit_csv(result, paths["csv"])
    emit_jsonl(result, paths["jsonl"])
    with open(paths["config"], "w", encoding="ascii", newline="\n") as fh:
        fh.write(json.dumps(result.config.to_json_dict(), indent=2, sort_keys=True) + "\n")
    return paths
