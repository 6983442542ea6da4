"""Training loop orchestration against a pluggable trainer.

The loop alternates plain training steps with periodic validation and,
once past warmup, sensitivity-analysis rounds that rebuild the sampling
policy. Augmented images are materialized one at a time: nothing is
pre-generated, so the live augmentation footprint stays at a single image
regardless of how many (kind, level) combinations the policy covers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .augment import ALL_KINDS, AugmentationKind, AugmentationSpec, apply
from .image import ImageBuffer
from .policy import build_policy, policy_to_json, sample
from .sensitivity import EvaluatorBinding, SAConfig, level_set_to_dict, run_sensitivity_analysis


class LoopError(RuntimeError):
    """Configuration or trainer failures that abort the run."""


@dataclass(frozen=True)
class LoopConfig:
    """Iteration structure of one run."""

    max_iter: int
    r_v: int  # validation every r_v iterations
    r_sa: int  # sensitivity analysis every r_sa iterations (multiple of r_v)
    warmup: int = 0
    seed: int = 0
    sort_order: str = "ascending"

    def __post_init__(self):
        if self.max_iter < 1:
            raise LoopError("max_iter must be >= 1")
        if self.r_v < 1 or self.r_sa < 1:
            raise LoopError("rates must be >= 1")
        if self.r_sa % self.r_v != 0:
            raise LoopError(f"r_sa ({self.r_sa}) must be a multiple of r_v ({self.r_v})")
        if not 0 <= self.warmup <= self.max_iter:
            raise LoopError("warmup must lie in [0, max_iter]")


class MemoryMeter:
    """Tracks live augmented-image bytes; peak proves the one-at-a-time claim."""

    def __init__(self):
        self.live = 0
        self.peak = 0

    def acquire(self, nbytes: int) -> None:
        self.live += int(nbytes)
        self.peak = max(self.peak, self.live)

    def release(self, nbytes: int) -> None:
        self.live -= int(nbytes)


class SimulatedLearner:
    """Desk-scale trainer stand-in with logistic accuracy surfaces.

    Accuracy for each kind decays from roughly ma_clean to ma_floor as the
    intensity crosses a per-kind midpoint; KID grows as alpha^kid_power.
    Midpoints move toward the intensities of sampled augmentations at
    adapt_rate (zero keeps the surface static) and drift deterministically
    for kinds listed in ``drift``.
    """

    def __init__(self, kinds=ALL_KINDS, ma_clean: float = 0.9, ma_floor: float = 0.2,
                 width: float = 0.12, adapt_rate: float = 0.0, kid_power: float = 1.0,
                 midpoints: dict | None = None, drift: dict | None = None):
        if not 0.0 < ma_floor < ma_clean <= 1.0:
            raise LoopError("need 0 < ma_floor < ma_clean <= 1")
        if width <= 0:
            raise LoopError("width must be positive")
        self.kinds = tuple(kinds)
        self.ma_clean = float(ma_clean)
        self.ma_floor = float(ma_floor)
        self.width = float(width)
        self.adapt_rate = float(adapt_rate)
        self.kid_power = float(kid_power)
        self.midpoints = {k: 0.5 for k in self.kinds}
        for name, value in (midpoints or {}).items():
            self.midpoints[AugmentationKind(name)] = float(value)
        self.drift = {AugmentationKind(name): float(v) for name, v in (drift or {}).items()}
        self.steps = 0

    def _ma(self, kind: AugmentationKind, alpha: float) -> float:
        mid = self.midpoints[kind]
        logistic = 1.0 / (1.0 + np.exp(-(mid - alpha) / self.width))
        return self.ma_floor + (self.ma_clean - self.ma_floor) * float(logistic)

    def evaluate(self, kind: AugmentationKind, alpha: float) -> tuple:
        return self._ma(kind, alpha), float(alpha) ** self.kid_power

    def train_step(self, spec: AugmentationSpec | None) -> None:
        self.steps += 1
        if spec is not None and self.adapt_rate > 0.0:
            mid = self.midpoints[spec.kind]
            mid += self.adapt_rate * (spec.magnitude - mid)
            self.midpoints[spec.kind] = float(np.clip(mid, 0.05, 0.95))
        for kind, rate in self.drift.items():
            self.midpoints[kind] = float(np.clip(self.midpoints[kind] + rate, 0.05, 0.95))

    def validate(self) -> dict:
        clean = [self._ma(kind, 0.0) for kind in self.kinds]
        return {"ma_clean": float(np.mean(clean))}


@dataclass
class RunResult:
    """Events plus the artifacts needed by the simulate command."""

    events: list
    meter: MemoryMeter
    final_policy: object | None
    sa_rounds: list = field(default_factory=list)  # (iteration, [LevelSet])


def training_loop(trainer, cfg: LoopConfig, sa_cfg: SAConfig | None = None,
                  kinds=ALL_KINDS, base_image: ImageBuffer | None = None,
                  log_sink=None) -> RunResult:
    """Run the augmented training loop and return its structured log.

    Every event is a dict {iter, event, payload}; when log_sink is given
    each event is also written immediately as one JSON line. The policy
    stays uninitialized (identity augmentation) until the first
    sensitivity round past warmup completes.
    """
    sa_cfg = sa_cfg or SAConfig()
    kinds = list(kinds)
    rng = np.random.Generator(np.random.Philox(key=int(cfg.seed)))
    meter = MemoryMeter()
    policy = None
    events = []
    sa_rounds = []

    def emit(iteration: int, event: str, payload: dict) -> None:
        record = {"iter": iteration, "event": event, "payload": payload}
        events.append(record)
        if log_sink is not None:
            log_sink.write(json.dumps(record) + "\n")

    for i in range(1, cfg.max_iter + 1):
        spec = sample(policy, rng) if policy is not None else None
        augmented = None
        if spec is not None and base_image is not None:
            augmented = apply(spec, base_image)
            meter.acquire(augmented.nbytes)
        try:
            trainer.train_step(spec)
        except Exception as exc:
            raise LoopError(f"trainer failed at iteration {i}: {exc}") from exc
        finally:
            if augmented is not None:
                meter.release(augmented.nbytes)
                augmented = None
        emit(i, "train", {
            "augmented": spec is not None,
            "kind": spec.kind.value if spec else None,
            "alpha": spec.magnitude if spec else None,
        })

        if i % cfg.r_v == 0:
            if i % cfg.r_sa == 0 and i > cfg.warmup:
                binding = EvaluatorBinding(trainer.evaluate)
                level_sets = run_sensitivity_analysis(binding, kinds, sa_cfg)
                failures = [ls for ls in level_sets if ls.status == "error"]
                emit(i, "sa_round", {
                    "level_sets": [level_set_to_dict(ls) for ls in level_sets],
                    "knots": {ls.kind.value: ls.knots for ls in level_sets},
                    "failed_kinds": [ls.kind.value for ls in failures],
                    "total_evaluations": binding.call_count,
                })
                sa_rounds.append((i, level_sets))
                usable = [ls for ls in level_sets if ls.status != "error" and ls.levels]
                if usable:
                    policy = build_policy(usable, sort_order=cfg.sort_order)
                    emit(i, "policy", json.loads(policy_to_json(policy)))
            try:
                metrics = trainer.validate()
            except Exception as exc:
                raise LoopError(f"validation failed at iteration {i}: {exc}") from exc
            emit(i, "validate", dict(metrics))

    if base_image is not None:
        emit(cfg.max_iter, "summary", {
            "peak_augmented_bytes": meter.peak,
            "single_image_bytes": base_image.nbytes,
            "offline_copy_factor": len(kinds) * sa_cfg.levels,
        })
    return RunResult(events=events, meter=meter, final_policy=policy, sa_rounds=sa_rounds)
