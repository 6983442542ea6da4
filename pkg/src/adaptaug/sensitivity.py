"""Cumulative sensitivity curve assembly and level solving.

The curve g(alpha) combines the normalized accuracy drop, the normalized
KID, and a linear spacing term:

    g(alpha) = (MA(0) - MA(alpha)) / (MA(0) - MA(alpha_max))
               - KID(alpha) / KID(alpha_max)
               + lam * alpha

so g(0) = 0 and g(alpha_max) = g_max = lam * alpha_max exactly. Solving
g(alpha_i) = g_max * i / L yields intensities equally spaced in
cumulative sensitivity. The adaptive solver estimates g with a monotone
spline from few evaluations, refining wherever the inverse image of a
target ordinate is still uncertain; the dense solver is the classic
uniform-grid baseline kept for budget comparisons.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentationKind
from .curve import bracket_uncertainty, invert, pchip_fit

# measured g may wiggle by this much (small-subset MA/KID noise) before the
# run is treated as genuinely non-monotone
MONOTONE_TOLERANCE = 0.1


class SensitivityError(RuntimeError):
    """Evaluator failures or unusably non-monotone measurements."""


class NonDegradingError(SensitivityError):
    """The augmentation moves neither accuracy nor KID; g is undefined."""


class FatalEvaluatorError(RuntimeError):
    """The evaluator backend itself is broken; aborts all kinds at once."""


@dataclass(frozen=True)
class SAConfig:
    """Solver configuration; g_max is pinned to lam * alpha_max."""

    levels: int = 5
    epsilon: float = 0.05
    lam: float = 2.0
    g_max: float = 2.0
    alpha_max: float = 1.0
    max_refinements: int = 50

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.alpha_max <= 0:
            raise ValueError("alpha_max must be positive")
        if abs(self.g_max - self.lam * self.alpha_max) > 1e-12:
            raise ValueError(
                f"g_max must equal lam * alpha_max ({self.lam * self.alpha_max}), got {self.g_max}"
            )
        if self.max_refinements < 0:
            raise ValueError("max_refinements must be >= 0")

    @property
    def targets(self) -> list:
        return [self.g_max * i / self.levels for i in range(1, self.levels)]


@dataclass(frozen=True)
class GSample:
    """One evaluated point on the sensitivity curve."""

    alpha: float
    ma: float
    kid: float
    g: float


@dataclass
class LevelSet:
    """Solved intensities for one augmentation kind."""

    kind: AugmentationKind
    levels: list
    uncertainties: list
    level_ma: list
    evaluations_used: int
    status: str = "ok"  # ok | uniform | error
    message: str = ""
    knots: list = field(default_factory=list)  # sampled (alpha, g) pairs, plot support


def g_value(alpha: float, ma_alpha: float, kid_alpha: float, ma_clean: float,
            ma_max: float, kid_max: float, cfg: SAConfig) -> float:
    """Cumulative sensitivity at one intensity, normalized to [0, g_max]."""
    if not kid_max > 0.0:
        raise NonDegradingError("kid at alpha_max is not positive: no measurable degradation")
    if not ma_clean > ma_max:
        raise NonDegradingError("accuracy does not drop over the intensity range")
    return (
        (ma_clean - ma_alpha) / (ma_clean - ma_max)
        - kid_alpha / kid_max
        + cfg.lam * float(alpha)
    )


class EvaluatorBinding:
    """Memoizing wrapper around a black-box (kind, alpha) -> (ma, kid) call.

    Each distinct (kind, alpha) is evaluated exactly once; call counts are
    tracked globally and per kind. Set concurrent_safe when the underlying
    evaluator tolerates overlapping calls from worker threads.
    """

    def __init__(self, evaluate_fn, concurrent_safe: bool = False):
        self._fn = evaluate_fn
        self.concurrent_safe = bool(concurrent_safe)
        self._cache: dict = {}
        self._lock = threading.Lock()
        self.call_count = 0
        self.calls_by_kind: dict = {}

    def evaluate(self, kind: AugmentationKind, alpha: float) -> tuple:
        key = (kind, float(alpha))
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        try:
            ma, kd = self._fn(kind, float(alpha))
        except (SensitivityError, FatalEvaluatorError):
            raise
        except Exception as exc:
            raise SensitivityError(f"evaluator failed at ({kind.value}, {alpha}): {exc}") from exc
        ma, kd = float(ma), float(kd)
        if not 0.0 <= ma <= 1.0:
            raise SensitivityError(f"evaluator returned ma={ma} outside [0, 1]")
        if kd < 0.0 or not np.isfinite(kd):
            raise SensitivityError(f"evaluator returned invalid kid={kd}")
        with self._lock:
            if key not in self._cache:
                self._cache[key] = (ma, kd)
                self.call_count += 1
                self.calls_by_kind[kind] = self.calls_by_kind.get(kind, 0) + 1
        return self._cache[key]

    def calls_for(self, kind: AugmentationKind) -> int:
        with self._lock:
            return self.calls_by_kind.get(kind, 0)


class _KindCurve:
    """Per-kind helper: anchors the normalization, then maps alpha -> g."""

    def __init__(self, evaluator: EvaluatorBinding, kind: AugmentationKind, cfg: SAConfig):
        self.evaluator = evaluator
        self.kind = kind
        self.cfg = cfg
        self.ma_clean, _kid0 = evaluator.evaluate(kind, 0.0)
        self.ma_max, self.kid_max = evaluator.evaluate(kind, cfg.alpha_max)
        # raises NonDegradingError when the anchors are uninformative
        g_value(cfg.alpha_max, self.ma_max, self.kid_max,
                self.ma_clean, self.ma_max, self.kid_max, cfg)

    def sample(self, alpha: float) -> GSample:
        ma, kd = self.evaluator.evaluate(self.kind, alpha)
        g = g_value(alpha, ma, kd, self.ma_clean, self.ma_max, self.kid_max, self.cfg)
        return GSample(alpha=float(alpha), ma=ma, kid=kd, g=g)

    def ma_at(self, alpha: float) -> float:
        return self.evaluator.evaluate(self.kind, alpha)[0]


def _check_measured_monotone(xs, ys):
    for i in range(len(ys) - 1):
        if ys[i + 1] < ys[i] - MONOTONE_TOLERANCE:
            raise SensitivityError(
                "measured g is non-monotone beyond tolerance between "
                f"alpha={xs[i]:.6g} (g={ys[i]:.6g}) and alpha={xs[i + 1]:.6g} (g={ys[i + 1]:.6g})"
            )


def _isotonic(ys: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto non-decreasing sequences."""
    values = [float(v) for v in ys]
    weights = [1.0] * len(values)
    starts = [[i] for i in range(len(values))]
    out_v, out_w, out_i = [], [], []
    for v, w, idx in zip(values, weights, starts):
        out_v.append(v)
        out_w.append(w)
        out_i.append(list(idx))
        while len(out_v) > 1 and out_v[-2] > out_v[-1]:
            v2, w2, i2 = out_v.pop(), out_w.pop(), out_i.pop()
            v1, w1, i1 = out_v.pop(), out_w.pop(), out_i.pop()
            out_v.append((v1 * w1 + v2 * w2) / (w1 + w2))
            out_w.append(w1 + w2)
            out_i.append(i1 + i2)
    result = np.empty(len(values))
    for v, idx in zip(out_v, out_i):
        result[idx] = v
    return result


def solve_levels_adaptive(evaluator: EvaluatorBinding, kind: AugmentationKind,
                          cfg: SAConfig | None = None) -> LevelSet:
    """Adaptively solve the L-1 interior levels for one augmentation kind.

    Starting from the pinned anchors (0, 0) and (alpha_max, g_max), each
    round fits a monotone spline, inverts it at the target ordinates,
    brackets every candidate's uncertainty from the neighbouring measured
    knots, and evaluates the true curve at the most uncertain candidate.
    Stops when every bracket half-width is below epsilon.
    """
    cfg = cfg or SAConfig()
    kc = _KindCurve(evaluator, kind, cfg)

    xs = [0.0, float(cfg.alpha_max)]
    ys = [0.0, float(cfg.g_max)]
    targets = cfg.targets

    refinements = 0
    message = ""
    while True:
        _check_measured_monotone(xs, ys)
        fit_ys = _isotonic(np.array(ys))
        knot_points = list(zip(xs, fit_ys))
        curve = pchip_fit(knot_points)
        candidates = [invert(curve, t) for t in targets]
        halves = []
        for cand, target in zip(candidates, targets):
            if min(abs(cand - x) for x in xs) < 1e-9:
                # candidate sits on a measured knot: its g is known exactly
                halves.append(0.0)
            else:
                halves.append(bracket_uncertainty(knot_points, cand, target).half_width)
        worst = int(np.argmax(halves))
        if halves[worst] < cfg.epsilon:
            break
        if refinements >= cfg.max_refinements:
            message = f"stopped at max_refinements={cfg.max_refinements} with uncertainty {halves[worst]:.4g}"
            break
        alpha_star = candidates[worst]
        gs = kc.sample(alpha_star)
        slot = int(np.searchsorted(xs, gs.alpha))
        xs.insert(slot, gs.alpha)
        ys.insert(slot, gs.g)
        refinements += 1

    levels = [float(c) for c in candidates]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise SensitivityError(f"solved levels are not strictly increasing: {levels}")
    # the SA budget is what was spent solving the curve (anchors plus
    # refinement samples); measuring level_ma afterwards is policy
    # bookkeeping and shows up only in the binding's total call_count
    solve_calls = evaluator.calls_for(kind)
    level_ma = [kc.ma_at(a) for a in levels]
    return LevelSet(
        kind=kind,
        levels=levels,
        uncertainties=[float(h) for h in halves],
        level_ma=level_ma,
        evaluations_used=solve_calls,
        status="ok",
        message=message,
        knots=[[float(x), float(y)] for x, y in zip(xs, ys)],
    )


def solve_levels_dense(evaluator: EvaluatorBinding, kind: AugmentationKind,
                       cfg: SAConfig | None = None, grid_n: int = 20) -> LevelSet:
    """Uniform-grid baseline: evaluate g everywhere, snap targets to the grid."""
    cfg = cfg or SAConfig()
    if grid_n < cfg.levels:
        raise ValueError(f"grid_n={grid_n} must be >= levels={cfg.levels}")
    kc = _KindCurve(evaluator, kind, cfg)

    grid = np.linspace(0.0, cfg.alpha_max, grid_n)
    gs = [kc.sample(a) for a in grid]
    # anchors are grid endpoints: force the constructed values
    g_vals = np.array([s.g for s in gs])
    g_vals[0], g_vals[-1] = 0.0, cfg.g_max

    levels, uncertainties = [], []
    half_step = float(grid[1] - grid[0]) / 2.0
    for t in cfg.targets:
        idx = int(np.argmin(np.abs(g_vals - t)))
        levels.append(float(grid[idx]))
        uncertainties.append(half_step)
    level_ma = [kc.ma_at(a) for a in levels]
    return LevelSet(
        kind=kind,
        levels=levels,
        uncertainties=uncertainties,
        level_ma=level_ma,
        evaluations_used=evaluator.calls_for(kind),
        status="ok",
        message="",
        knots=[[float(a), float(v)] for a, v in zip(grid, g_vals)],
    )


def uniform_fallback(evaluator: EvaluatorBinding, kind: AugmentationKind,
                     cfg: SAConfig, reason: str) -> LevelSet:
    """Evenly spaced levels for kinds whose g is uninformative."""
    levels = [cfg.alpha_max * i / cfg.levels for i in range(1, cfg.levels)]
    level_ma = [evaluator.evaluate(kind, a)[0] for a in levels]
    return LevelSet(
        kind=kind,
        levels=levels,
        uncertainties=[0.0] * len(levels),
        level_ma=level_ma,
        evaluations_used=evaluator.calls_for(kind),
        status="uniform",
        message=reason,
    )


def run_sensitivity_analysis(evaluator: EvaluatorBinding, kinds,
                             cfg: SAConfig | None = None,
                             parallel: bool | None = None) -> list:
    """One LevelSet per kind, in input order.

    Non-degrading kinds fall back to uniform levels (status 'uniform');
    other per-kind failures are captured as status 'error' records instead
    of aborting the remaining kinds. Kinds run concurrently only when the
    evaluator declares itself concurrency-safe.
    """
    cfg = cfg or SAConfig()
    kinds = list(kinds)
    if not kinds:
        raise ValueError("no kinds given")

    def solve_one(kind: AugmentationKind) -> LevelSet:
        try:
            return solve_levels_adaptive(evaluator, kind, cfg)
        except NonDegradingError as exc:
            return uniform_fallback(evaluator, kind, cfg, str(exc))
        except SensitivityError as exc:
            return LevelSet(kind=kind, levels=[], uncertainties=[], level_ma=[],
                            evaluations_used=evaluator.calls_for(kind),
                            status="error", message=str(exc))

    use_parallel = evaluator.concurrent_safe if parallel is None else parallel
    if use_parallel and len(kinds) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(kinds))) as pool:
            return list(pool.map(solve_one, kinds))
    return [solve_one(k) for k in kinds]


# ---------------------------------------------------------------------------
# serialization


def level_set_to_dict(ls: LevelSet) -> dict:
    return {
        "kind": ls.kind.value,
        "levels": [float(v) for v in ls.levels],
        "uncertainties": [float(v) for v in ls.uncertainties],
        "level_ma": [float(v) for v in ls.level_ma],
        "evaluations_used": int(ls.evaluations_used),
        "status": ls.status,
        "message": ls.message,
    }


def level_sets_to_json(level_sets) -> str:
    return json.dumps([level_set_to_dict(ls) for ls in level_sets], indent=2)


def level_set_from_dict(payload: dict) -> LevelSet:
    return LevelSet(
        kind=AugmentationKind(payload["kind"]),
        levels=[float(v) for v in payload["levels"]],
        uncertainties=[float(v) for v in payload["uncertainties"]],
        level_ma=[float(v) for v in payload["level_ma"]],
        evaluations_used=int(payload["evaluations_used"]),
        status=payload.get("status", "ok"),
        message=payload.get("message", ""),
    )


def level_sets_from_json(text: str) -> list:
    return [level_set_from_dict(p) for p in json.loads(text)]


def write_trace_csv(path, level_sets, round_index: int = 0, append: bool = False,
                    g_max: float = 2.0) -> None:
    """Knot and level trace rows for the plot command.

    Columns: kind, round, point_type (knot|level), x, y.
    """
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        if not append:
            fh.write("kind,round,point_type,x,y\n")
        for ls in level_sets:
            for x, y in ls.knots:
                fh.write(f"{ls.kind.value},{round_index},knot,{x!r},{y!r}\n")
            for i, level in enumerate(ls.levels):
                target = (i + 1) * g_max / (len(ls.levels) + 1)
                fh.write(f"{ls.kind.value},{round_index},level,{level!r},{target!r}\n")
