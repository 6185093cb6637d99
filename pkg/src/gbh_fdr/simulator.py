"""Monte Carlo driver for the equicorrelated one-sided normal-means model.

Sampling model per replication: Y_i = mu_i + sqrt(1-rho)*X_i + sqrt(rho)*X0
with X0, X1..Xm iid standard normal and p_i = 1 - cdf(Y_i).  Every
replication owns a counter-based RNG substream keyed by (seed, rep_index), so
results are bit-identical for a fixed seed no matter how replications are
scheduled across threads; the reduction always runs over the replication
array in index order.

Uniforms are drawn as lattice midpoints (k + 0.5)/2^53 and pushed through the
package quantile, so normal variates inherit the audited inverse-CDF path and
never hit the 0/1 endpoints.  P-values are clipped to the open unit interval
at the representable edges (1e-300 and 1 - 2^-53).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .bound import BoundInput, fdr_bound, in_theorem_domain
from .normal import norm_quantile, norm_sf
from .procedures import GroupedPValues, RejectionResult, bh_step_up, gbh1, storey

PROCEDURES = ("gbh1", "storey", "bh")

# Label attached to JSON output when a campaign ran on the built-in desk
# defaults; those defaults are this package's choices, not derived values.
DEFAULTS_SOURCE = "builtin-defaults"

_P_FLOOR = 1e-300
_P_CEIL = float(np.nextafter(1.0, 0.0))
_U_DENOM = float(2 ** 53)


class ConfigError(ValueError):
    """Invalid simulation configuration."""


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo campaign.

    Groups are contiguous index blocks in the order of group_sizes; within
    each group the first nonnull_counts[j] indices carry the alternative mean
    (exchangeability makes the placement irrelevant in distribution).
    effect_mu is a single alternative mean or one per group.
    """

    m: int = 200
    group_sizes: tuple = (50, 50, 50, 50)
    nonnull_counts: tuple = (0, 0, 0, 0)
    effect_mu: Union[float, tuple] = 2.0
    rho: float = 0.1
    lam: float = 0.5
    alpha: float = 0.05
    procedure: str = "gbh1"
    replications: int = 20000
    seed: int = 20260822

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(n) for n in self.group_sizes))
        object.__setattr__(self, "nonnull_counts", tuple(int(n) for n in self.nonnull_counts))
        if isinstance(self.effect_mu, (tuple, list, np.ndarray)):
            object.__setattr__(self, "effect_mu", tuple(float(v) for v in self.effect_mu))
        else:
            object.__setattr__(self, "effect_mu", float(self.effect_mu))
        if self.m < 1:
            raise ConfigError(f"m={self.m} must be >= 1")
        if len(self.group_sizes) == 0 or any(n < 1 for n in self.group_sizes):
            raise ConfigError("group_sizes must be nonempty with every size >= 1")
        if sum(self.group_sizes) != self.m:
            raise ConfigError(f"group_sizes sum to {sum(self.group_sizes)}, expected m={self.m}")
        if len(self.nonnull_counts) != len(self.group_sizes):
            raise ConfigError("nonnull_counts must align with group_sizes")
        if any(c < 0 or c > n for c, n in zip(self.nonnull_counts, self.group_sizes)):
            raise ConfigError("each nonnull count must lie in [0, group size]")
        mus = self.effect_mu if isinstance(self.effect_mu, tuple) else (self.effect_mu,)
        if isinstance(self.effect_mu, tuple) and len(self.effect_mu) != len(self.group_sizes):
            raise ConfigError("per-group effect_mu must align with group_sizes")
        if any(not (v > 0.0) for v in mus):
            raise ConfigError("effect_mu must be > 0")
        if not (0.0 <= self.rho < 1.0):
            raise ConfigError(f"rho={self.rho} outside [0, 1)")
        if not (0.0 < self.lam < 1.0):
            raise ConfigError(f"lambda={self.lam} outside (0, 1)")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha={self.alpha} outside (0, 1)")
        if self.procedure not in PROCEDURES:
            raise ConfigError(f"procedure={self.procedure!r} not one of {PROCEDURES}")
        if self.replications < 1:
            raise ConfigError(f"replications={self.replications} must be >= 1")
        int(self.seed)

    def groups(self) -> tuple:
        out, start = [], 0
        for n in self.group_sizes:
            out.append(np.arange(start, start + n, dtype=np.intp))
            start += n
        return tuple(out)

    def null_mask(self) -> np.ndarray:
        """True where the mean is zero."""
        mask = np.ones(self.m, dtype=bool)
        start = 0
        for n, c in zip(self.group_sizes, self.nonnull_counts):
            mask[start:start + c] = False
            start += n
        return mask

    def mu_vector(self) -> np.ndarray:
        mu = np.zeros(self.m)
        mus = (self.effect_mu,) * len(self.group_sizes) \
            if not isinstance(self.effect_mu, tuple) else self.effect_mu
        start = 0
        for n, c, v in zip(self.group_sizes, self.nonnull_counts, mus):
            mu[start:start + c] = v
            start += n
        return mu

    def n_alternatives(self) -> int:
        return sum(self.nonnull_counts)


@dataclass(frozen=True)
class SimSummary:
    """Campaign outcome: FDR and power estimates with standard errors, the
    closed-form bound when (lambda, rho, alpha) sits in its domain (else
    None), and the config that produced it.  power_hat/power_se are None for
    all-null configs."""

    fdr_hat: float
    fdr_se: float
    power_hat: Optional[float]
    power_se: Optional[float]
    bound_value: Optional[float]
    replications_run: int
    config: SimConfig


def _substream(seed: int, rep_index: int) -> np.random.Generator:
    key = np.array([int(seed) % (2 ** 64), int(rep_index) % (2 ** 64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _uniform_open(gen: np.random.Generator, n: int) -> np.ndarray:
    return (gen.integers(0, 2 ** 53, size=n).astype(float) + 0.5) / _U_DENOM


def generate_sample(config: SimConfig, rep_index: int) -> tuple:
    """(y, is_null) for one replication; X0 is the substream's first draw."""
    gen = _substream(config.seed, rep_index)
    z = norm_quantile(_uniform_open(gen, config.m + 1))
    x0, x = z[0], z[1:]
    y = config.mu_vector() + math.sqrt(1.0 - config.rho) * x + math.sqrt(config.rho) * x0
    return y, config.null_mask()


def generate_sample_conditional(config: SimConfig, rep_index: int, x0: float) -> tuple:
    """Same model with the shared factor pinned at x0 (m draws, no X0 draw)."""
    gen = _substream(config.seed, rep_index)
    x = norm_quantile(_uniform_open(gen, config.m))
    y = config.mu_vector() + math.sqrt(1.0 - config.rho) * x + math.sqrt(config.rho) * x0
    return y, config.null_mask()


def pvalues_from_sample(y) -> np.ndarray:
    """One-sided p-values 1 - cdf(y), clipped into the open unit interval."""
    p = norm_sf(np.asarray(y, dtype=float))
    return np.clip(p, _P_FLOOR, _P_CEIL)


def false_discovery_proportion(result: RejectionResult, is_null) -> float:
    """V/R with the 0/0 := 0 convention."""
    if result.k_star == 0:
        return 0.0
    is_null = np.asarray(is_null, dtype=bool)
    v = int(is_null[list(result.rejected)].sum())
    return v / result.k_star


def _apply_procedure(config: SimConfig, groups: tuple, p: np.ndarray) -> RejectionResult:
    if config.procedure == "gbh1":
        return gbh1(GroupedPValues(p, groups), config.lam, config.alpha)
    if config.procedure == "storey":
        return storey(p, config.lam, config.alpha)
    return bh_step_up(p, config.alpha)


def _bound_or_none(config: SimConfig) -> Optional[float]:
    if in_theorem_domain(config.lam, config.rho, config.alpha):
        return fdr_bound(BoundInput(lam=config.lam, rho=config.rho, alpha=config.alpha)).total
    return None


def _mc_loop(config: SimConfig, threads: int, sample_fn) -> SimSummary:
    reps = config.replications
    groups = config.groups()
    is_null = config.null_mask()
    n_alt = config.n_alternatives()
    fdp = np.empty(reps)
    tpp = np.empty(reps)

    def fill(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            y, _ = sample_fn(config, r)
            res = _apply_procedure(config, groups, pvalues_from_sample(y))
            if res.k_star == 0:
                fdp[r] = 0.0
                tpp[r] = 0.0
            else:
                v = int(is_null[list(res.rejected)].sum())
                fdp[r] = v / res.k_star
                tpp[r] = (res.k_star - v) / max(n_alt, 1)

    threads = max(1, int(threads))
    if threads == 1 or reps < 2 * threads:
        fill(0, reps)
    else:
        edges = np.linspace(0, reps, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(fill, int(lo), int(hi))
                       for lo, hi in zip(edges[:-1], edges[1:])]
            for f in futures:
                f.result()

    fdr_hat = float(np.mean(fdp))
    fdr_se = float(np.std(fdp, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    if n_alt == 0:
        power_hat = power_se = None
    else:
        power_hat = float(np.mean(tpp))
        power_se = float(np.std(tpp, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return SimSummary(fdr_hat=fdr_hat, fdr_se=fdr_se, power_hat=power_hat,
                      power_se=power_se, bound_value=_bound_or_none(config),
                      replications_run=reps, config=config)


def run_mc(config: SimConfig, threads: int = 1) -> SimSummary:
    """Run the campaign; deterministic for a fixed seed at any thread count."""
    return _mc_loop(config, threads, generate_sample)


def run_mc_conditional(config: SimConfig, x0: float, threads: int = 1) -> SimSummary:
    """Run the campaign with the shared factor pinned at x0.  The attached
    bound_value is None: the closed form speaks to the marginal model."""
    sampler = lambda cfg, r: generate_sample_conditional(cfg, r, x0)
    summary = _mc_loop(config, threads, sampler)
    return SimSummary(fdr_hat=summary.fdr_hat, fdr_se=summary.fdr_se,
                      power_hat=summary.power_hat, power_se=summary.power_se,
                      bound_value=None, replications_run=summary.replications_run,
                      config=config)


# --- flat key=value config files ------------------------------------------

_KEY_TO_FIELD = {
    "m": "m", "group_sizes": "group_sizes", "nonnull_counts": "nonnull_counts",
    "effect_mu": "effect_mu", "rho": "rho", "lambda": "lam", "alpha": "alpha",
    "procedure": "procedure", "replications": "replications", "seed": "seed",
}


def _parse_value(field: str, raw: str):
    raw = raw.strip()
    if field in ("m", "replications", "seed"):
        return int(raw)
    if field in ("group_sizes", "nonnull_counts"):
        return tuple(int(v) for v in raw.split(",") if v.strip() != "")
    if field == "effect_mu":
        parts = [v for v in raw.split(",") if v.strip() != ""]
        return float(parts[0]) if len(parts) == 1 else tuple(float(v) for v in parts)
    if field == "procedure":
        return raw
    return float(raw)


def load_config_file(path) -> dict:
    """Parse a flat key=value file ('#' starts a comment) into field updates."""
    updates = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _KEY_TO_FIELD:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            field = _KEY_TO_FIELD[key]
            try:
                updates[field] = _parse_value(field, raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return updates


def config_with_updates(base: SimConfig, updates: dict) -> SimConfig:
    return replace(base, **updates) if updates else base


# --- serialization ---------------------------------------------------------

def summary_json_dict(summary: SimSummary, config_source: str = "builtin-defaults") -> dict:
    """Fixed-key-order dict for JSON output; floats keep full repr precision."""
    cfg = summary.config
    return {
        "config": {
            "m": cfg.m,
            "group_sizes": list(cfg.group_sizes),
            "nonnull_counts": list(cfg.nonnull_counts),
            "effect_mu": list(cfg.effect_mu) if isinstance(cfg.effect_mu, tuple) else cfg.effect_mu,
            "rho": cfg.rho,
            "lambda": cfg.lam,
            "alpha": cfg.alpha,
            "procedure": cfg.procedure,
            "replications": cfg.replications,
            "seed": cfg.seed,
        },
        "config_source": config_source,
        "defaults_note": "default campaign settings are this package's desk-scale choices",
        "replications_run": summary.replications_run,
        "fdr_hat": summary.fdr_hat,
        "fdr_se": summary.fdr_se,
        "power_hat": summary.power_hat,
        "power_se": summary.power_se,
        "bound_value": summary.bound_value,
    }


LOG_HEADER = "procedure,m,rho,lambda,alpha,reps,fdr_hat,fdr_se,power_hat,power_se,bound"


def log_csv_line(summary: SimSummary) -> str:
    cfg = summary.config
    opt = lambda v: "" if v is None else repr(v)
    return ",".join([
        cfg.procedure, str(cfg.m), repr(cfg.rho), repr(cfg.lam), repr(cfg.alpha),
        str(summary.replications_run), repr(summary.fdr_hat), repr(summary.fdr_se),
        opt(summary.power_hat), opt(summary.power_se), opt(summary.bound_value),
    ])


def append_log(summary: SimSummary, path) -> None:
    """Append one campaign line, writing the header first on a fresh file."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(LOG_HEADER + "\n")
        fh.write(log_csv_line(summary) + "\n")
