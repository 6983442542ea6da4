"""Evaluator backends for the solve command.

Three forms, selected by a spec string:

  analytic:power:<p>   closed-form oracle whose sensitivity curve is
                       exactly g(alpha) = 2 * alpha**p
  table:<csv path>     rows kind,alpha,ma,kid with linear interpolation
                       in alpha, so precomputed model evaluations can
                       drive the solver offline
  exec:<command>       child process speaking one JSON request
                       {"kind":..., "alpha":...} per stdin line and one
                       JSON response {"ma":..., "kid":...} per stdout line
"""

from __future__ import annotations

import csv
import json
import shlex
import subprocess

import numpy as np

from .augment import AugmentationKind
from .sensitivity import FatalEvaluatorError


class EvaluatorSpecError(ValueError):
    """Unparseable evaluator spec string or table file."""


class EvaluatorProtocolError(FatalEvaluatorError):
    """Child process broke the line-delimited JSON contract."""


class PowerOracle:
    """g(alpha) = g_max * alpha**p realized through (ma, kid) readings.

    kid(alpha) = alpha, and ma absorbs the rest: with ma(0) = 0.7 and
    ma(1) = 0.2 the normalized accuracy drop equals 2*alpha**p - alpha, so
    the assembled curve is exactly 2*alpha**p for p in [0.5, 3].
    """

    concurrent_safe = True

    def __init__(self, p: float):
        if not 0.5 <= float(p) <= 3.0:
            raise EvaluatorSpecError(f"power exponent must lie in [0.5, 3], got {p}")
        self.p = float(p)

    def g_true(self, alpha: float) -> float:
        return 2.0 * float(alpha) ** self.p

    def inverse(self, g: float) -> float:
        return (float(g) / 2.0) ** (1.0 / self.p)

    def __call__(self, kind: AugmentationKind, alpha: float) -> tuple:
        drop = 2.0 * alpha**self.p - alpha  # normalized MA(0) - MA(alpha)
        return 0.7 - 0.5 * drop, float(alpha)


class TableEvaluator:
    """Linear interpolation over precomputed (kind, alpha, ma, kid) rows."""

    concurrent_safe = True

    def __init__(self, path):
        rows: dict = {}
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None or [c.strip() for c in header[:4]] != ["kind", "alpha", "ma", "kid"]:
                    raise EvaluatorSpecError(
                        f"{path}: expected header 'kind,alpha,ma,kid', got {header}"
                    )
                for line_no, row in enumerate(reader, start=2):
                    if not row:
                        continue
                    try:
                        kind = AugmentationKind(row[0].strip())
                        alpha, ma, kid = (float(v) for v in row[1:4])
                    except (ValueError, IndexError) as exc:
                        raise EvaluatorSpecError(f"{path}:{line_no}: bad row {row}: {exc}")
                    rows.setdefault(kind, []).append((alpha, ma, kid))
        except OSError as exc:
            raise EvaluatorSpecError(f"cannot read evaluator table {path}: {exc}")
        if not rows:
            raise EvaluatorSpecError(f"{path}: no data rows")
        self._grid = {}
        for kind, pts in rows.items():
            pts.sort()
            alphas = np.array([p[0] for p in pts])
            if np.any(np.diff(alphas) <= 0):
                raise EvaluatorSpecError(f"{path}: duplicate alpha for kind {kind.value}")
            if alphas[0] > 0.0 or alphas[-1] < 1.0:
                raise EvaluatorSpecError(
                    f"{path}: kind {kind.value} must cover alpha 0 and 1, spans "
                    f"[{alphas[0]}, {alphas[-1]}]"
                )
            self._grid[kind] = (
                alphas,
                np.array([p[1] for p in pts]),
                np.array([p[2] for p in pts]),
            )

    @property
    def kinds(self) -> list:
        return list(self._grid)

    def __call__(self, kind: AugmentationKind, alpha: float) -> tuple:
        if kind not in self._grid:
            raise EvaluatorSpecError(f"no table rows for kind {kind.value}")
        alphas, mas, kids = self._grid[kind]
        return float(np.interp(alpha, alphas, mas)), float(np.interp(alpha, alphas, kids))


class ExecEvaluator:
    """Line-delimited JSON bridge to an external evaluator process.

    Requests are answered strictly in order, so calls are serialized; use
    close() (or a with-block) to shut the child down.
    """

    concurrent_safe = False

    def __init__(self, command: str):
        if not command.strip():
            raise EvaluatorSpecError("empty exec command")
        self.command = command
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EvaluatorProtocolError(f"cannot spawn evaluator {command!r}: {exc}")

    def __call__(self, kind: AugmentationKind, alpha: float) -> tuple:
        request = json.dumps({"kind": kind.value, "alpha": float(alpha)})
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluatorProtocolError(f"evaluator pipe failed on request {request}: {exc}")
        if not line:
            raise EvaluatorProtocolError(f"evaluator closed its output after request {request}")
        try:
            payload = json.loads(line)
            ma, kid = float(payload["ma"]), float(payload["kid"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise EvaluatorProtocolError(f"bad evaluator response line: {line.rstrip()!r}")
        if not 0.0 <= ma <= 1.0 or kid < 0.0:
            raise EvaluatorProtocolError(f"evaluator response out of range: {line.rstrip()!r}")
        return ma, kid

    def close(self) -> None:
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        self._proc.terminate()
        self._proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def make_evaluator(spec: str):
    """Build an evaluator callable from its command-line spec string."""
    head, _, rest = spec.partition(":")
    if head == "analytic":
        family, _, params = rest.partition(":")
        if family != "power":
            raise EvaluatorSpecError(f"unknown analytic family {family!r} (have: power)")
        try:
            return PowerOracle(float(params))
        except ValueError:
            raise EvaluatorSpecError(f"bad power parameter {params!r}")
    if head == "table":
        if not rest:
            raise EvaluatorSpecError("table spec needs a CSV path: table:<path>")
        return TableEvaluator(rest)
    if head == "exec":
        if not rest:
            raise EvaluatorSpecError("exec spec needs a command: exec:<command>")
        return ExecEvaluator(rest)
    raise EvaluatorSpecError(
        f"unknown evaluator spec {spec!r}; expected analytic:..., table:..., or exec:..."
    )
