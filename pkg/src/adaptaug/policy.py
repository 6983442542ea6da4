"""Beta-Binomial augmentation sampling policy.

All solved (kind, level) pairs are flattened, sorted by their measured
accuracy (worst first), and given the probability masses of a
BetaBinomial(n, a=0.75, b=1.0) distribution, which decrease with rank:
the levels where the model performs worst are sampled most often.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .augment import ALL_KINDS, AugmentationKind, AugmentationSpec


class PolicyError(ValueError):
    """Empty inputs or invalid distribution parameters."""


_KIND_ORDER = {kind: i for i, kind in enumerate(ALL_KINDS)}


def _betaln(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_binomial_pmf(n: int, k: int, a: float, b: float) -> float:
    """P[K = k] for K ~ BetaBinomial(n, a, b), via log-gamma."""
    if a <= 0 or b <= 0:
        raise PolicyError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0 <= k <= n:
        raise PolicyError(f"k must lie in [0, n], got k={k}, n={n}")
    log_comb = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log_comb + _betaln(k + a, n - k + b) - _betaln(a, b))


def beta_binomial_weights(count: int, a: float = 0.75, b: float = 1.0) -> np.ndarray:
    """pmf over ranks 0..count-1, i.e. BetaBinomial(count - 1, a, b).

    The vector is renormalized so accumulated log-gamma rounding cannot
    push the total away from 1 at large counts.
    """
    if count < 1:
        raise PolicyError("need at least one entry")
    weights = np.array([beta_binomial_pmf(count - 1, k, a, b) for k in range(count)])
    return weights / weights.sum()


@dataclass(frozen=True)
class PolicyEntry:
    kind: AugmentationKind
    alpha: float
    ma: float


@dataclass(frozen=True, eq=False)
class AugmentationPolicy:
    """Rank-sorted entries plus their categorical probabilities."""

    entries: tuple
    pmf: np.ndarray

    @cached_property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)


def build_policy(level_sets, a: float = 0.75, b: float = 1.0,
                 sort_order: str = "ascending") -> AugmentationPolicy:
    """Flatten level sets into a sampling policy.

    sort_order 'ascending' (the default) places the lowest-accuracy entry
    at rank 0 where the Beta-Binomial mass is largest; 'descending' is the
    literal best-first ordering, kept selectable for comparison runs.
    """
    if sort_order not in ("ascending", "descending"):
        raise PolicyError(f"sort_order must be 'ascending' or 'descending', got {sort_order!r}")
    entries = []
    for ls in level_sets:
        if getattr(ls, "status", "ok") == "error":
            continue
        for alpha, ma in zip(ls.levels, ls.level_ma):
            entries.append(PolicyEntry(kind=ls.kind, alpha=float(alpha), ma=float(ma)))
    if not entries:
        raise PolicyError("no usable levels to build a policy from")
    sign = 1.0 if sort_order == "ascending" else -1.0
    entries.sort(key=lambda e: (sign * e.ma, _KIND_ORDER[e.kind], e.alpha))
    return AugmentationPolicy(entries=tuple(entries), pmf=beta_binomial_weights(len(entries), a, b))


def sample(policy: AugmentationPolicy, rng: np.random.Generator) -> AugmentationSpec:
    """Inverse-CDF draw; the spec carries a fresh per-draw noise seed."""
    u = rng.random()
    idx = int(np.searchsorted(policy.cdf, u, side="right"))
    idx = min(idx, len(policy.entries) - 1)
    entry = policy.entries[idx]
    seed = int(rng.integers(0, 2**63, dtype=np.int64))
    return AugmentationSpec(kind=entry.kind, magnitude=entry.alpha, seed=seed)


def policy_to_json(policy: AugmentationPolicy) -> str:
    return json.dumps(
        {
            "entries": [
                {"kind": e.kind.value, "alpha": e.alpha, "ma": e.ma} for e in policy.entries
            ],
            "pmf": [float(p) for p in policy.pmf],
        },
        indent=2,
    )


def policy_from_json(text: str) -> AugmentationPolicy:
    payload = json.loads(text)
    entries = tuple(
        PolicyEntry(kind=AugmentationKind(e["kind"]), alpha=float(e["alpha"]), ma=float(e["ma"]))
        for e in payload["entries"]
    )
    if not entries:
        raise PolicyError("policy JSON has no entries")
    return AugmentationPolicy(entries=entries, pmf=np.array([float(p) for p in payload["pmf"]]))
