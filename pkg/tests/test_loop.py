import io
import json

import numpy as np
import pytest

from adaptaug.augment import ALL_KINDS, AugmentationKind
from adaptaug.image import synthetic_image
from adaptaug.loop import (
    LoopConfig,
    LoopError,
    MemoryMeter,
    SimulatedLearner,
    training_loop,
)
from adaptaug.sensitivity import SAConfig

FEW_KINDS = [AugmentationKind.H_LIGHTER, AugmentationKind.BLUR, AugmentationKind.NOISE]


def test_loop_config_validation():
    with pytest.raises(LoopError):
        LoopConfig(max_iter=10, r_v=3, r_sa=7)  # r_sa not a multiple of r_v
    with pytest.raises(LoopError):
        LoopConfig(max_iter=10, r_v=2, r_sa=4, warmup=11)
    LoopConfig(max_iter=10, r_v=2, r_sa=4, warmup=10)


def test_event_counts_match_schedule():
    cfg = LoopConfig(max_iter=100, r_v=10, r_sa=20, warmup=0, seed=1)
    result = training_loop(SimulatedLearner(kinds=FEW_KINDS), cfg, SAConfig(), kinds=FEW_KINDS)
    kinds_of = [e["event"] for e in result.events]
    assert kinds_of.count("validate") == 10
    assert kinds_of.count("sa_round") == 5
    assert kinds_of.count("policy") == 5
    assert kinds_of.count("train") == 100


def test_warmup_equal_to_max_iter_means_no_augmentation():
    cfg = LoopConfig(max_iter=40, r_v=10, r_sa=10, warmup=40, seed=1)
    result = training_loop(SimulatedLearner(kinds=FEW_KINDS), cfg, SAConfig(), kinds=FEW_KINDS)
    events = result.events
    assert not any(e["event"] == "sa_round" for e in events)
    assert all(not e["payload"]["augmented"] for e in events if e["event"] == "train")
    assert result.final_policy is None


def test_no_augmentation_before_first_sa_round():
    cfg = LoopConfig(max_iter=60, r_v=10, r_sa=20, warmup=25, seed=3)
    result = training_loop(SimulatedLearner(kinds=FEW_KINDS), cfg, SAConfig(), kinds=FEW_KINDS)
    first_sa = next(e["iter"] for e in result.events if e["event"] == "sa_round")
    assert first_sa == 40  # first multiple of 20 past warmup 25
    for e in result.events:
        if e["event"] == "train" and e["iter"] <= first_sa:
            assert not e["payload"]["augmented"]
    assert any(e["payload"]["augmented"] for e in result.events
               if e["event"] == "train" and e["iter"] > first_sa)


def test_log_replay_is_byte_identical():
    def run_once():
        sink = io.StringIO()
        cfg = LoopConfig(max_iter=50, r_v=10, r_sa=10, warmup=5, seed=42)
        training_loop(SimulatedLearner(kinds=FEW_KINDS, adapt_rate=0.05), cfg, SAConfig(),
                      kinds=FEW_KINDS, base_image=synthetic_image(24, 24, 1), log_sink=sink)
        return sink.getvalue()

    assert run_once() == run_once()


def test_different_seed_changes_draws():
    def specs(seed):
        cfg = LoopConfig(max_iter=60, r_v=10, r_sa=10, warmup=0, seed=seed)
        result = training_loop(SimulatedLearner(kinds=FEW_KINDS), cfg, SAConfig(), kinds=FEW_KINDS)
        return [e["payload"]["alpha"] for e in result.events
                if e["event"] == "train" and e["payload"]["augmented"]]

    assert specs(1) != specs(2)


def test_memory_meter_peak_single_image():
    img = synthetic_image(32, 32, 0)
    cfg = LoopConfig(max_iter=60, r_v=10, r_sa=20, warmup=0, seed=9)
    result = training_loop(SimulatedLearner(kinds=FEW_KINDS), cfg, SAConfig(),
                           kinds=FEW_KINDS, base_image=img)
    assert result.meter.peak == img.nbytes
    assert result.meter.live == 0
    summary = [e for e in result.events if e["event"] == "summary"]
    assert summary and summary[0]["payload"]["peak_augmented_bytes"] == img.nbytes


def test_trainer_failure_reports_iteration():
    class Exploding(SimulatedLearner):
        def train_step(self, spec):
            if self.steps == 6:
                raise RuntimeError("kaboom")
            super().train_step(spec)

    cfg = LoopConfig(max_iter=20, r_v=5, r_sa=5, warmup=0, seed=1)
    with pytest.raises(LoopError, match="iteration 7"):
        training_loop(Exploding(kinds=FEW_KINDS), cfg, SAConfig(), kinds=FEW_KINDS)


def test_sa_round_failures_logged_and_skipped():
    class FlakyLearner(SimulatedLearner):
        def evaluate(self, kind, alpha):
            if kind is AugmentationKind.NOISE and alpha not in (0.0, 1.0):
                raise RuntimeError("bad kind")
            return super().evaluate(kind, alpha)

    cfg = LoopConfig(max_iter=20, r_v=10, r_sa=10, warmup=0, seed=1)
    result = training_loop(FlakyLearner(kinds=FEW_KINDS), cfg, SAConfig(), kinds=FEW_KINDS)
    rounds = [e for e in result.events if e["event"] == "sa_round"]
    assert rounds and all(e["payload"]["failed_kinds"] == ["noise"] for e in rounds)
    assert result.final_policy is not None  # the healthy kinds still drive a policy


def test_simulated_learner_monotone_and_bounded():
    learner = SimulatedLearner()
    for kind in ALL_KINDS:
        mas = [learner.evaluate(kind, a)[0] for a in np.linspace(0, 1, 11)]
        assert all(0.0 <= m <= 1.0 for m in mas)
        assert all(a >= b for a, b in zip(mas, mas[1:]))


def test_simulated_learner_static_without_adaptation():
    learner = SimulatedLearner(adapt_rate=0.0)
    before = dict(learner.midpoints)
    from adaptaug.augment import AugmentationSpec

    learner.train_step(AugmentationSpec(kind=AugmentationKind.BLUR, magnitude=0.9))
    assert learner.midpoints == before


def test_simulated_learner_drift_moves_midpoint():
    learner = SimulatedLearner(drift={"h_lighter": 0.01})
    for _ in range(10):
        learner.train_step(None)
    assert learner.midpoints[AugmentationKind.H_LIGHTER] == pytest.approx(0.6)
    assert learner.midpoints[AugmentationKind.BLUR] == 0.5


def test_drift_shifts_solved_levels_upward():
    cfg = LoopConfig(max_iter=120, r_v=30, r_sa=30, warmup=0, seed=5)
    learner = SimulatedLearner(kinds=FEW_KINDS, drift={"h_lighter": 0.002})
    result = training_loop(learner, cfg, SAConfig(), kinds=FEW_KINDS)
    h_rounds = [
        [ls for ls in sets if ls.kind is AugmentationKind.H_LIGHTER][0]
        for _, sets in result.sa_rounds
    ]
    first, last = h_rounds[0].levels, h_rounds[-1].levels
    assert np.mean(last) > np.mean(first)


def test_meter_accounting():
    meter = MemoryMeter()
    meter.acquire(100)
    meter.acquire(50)
    meter.release(100)
    meter.acquire(30)
    assert meter.peak == 150
    assert meter.live == 80


def test_events_are_json_serializable():
    cfg = LoopConfig(max_iter=20, r_v=10, r_sa=10, warmup=0, seed=2)
    result = training_loop(SimulatedLearner(kinds=FEW_KINDS), cfg, SAConfig(), kinds=FEW_KINDS)
    for event in result.events:
        json.dumps(event)
        assert set(event) == {"iter", "event", "payload"}
