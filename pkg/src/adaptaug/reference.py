"""Loader for the packaged reference level fixtures.

The shipped table records solved levels from a full-scale training run in
each perturbation's native units (alpha for channels, kernel size for
blur, sigma for noise). It exists for documentation and plot demos; the
numbers are model-dependent, so nothing asserts them beyond structural
invariants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .augment import AugmentationKind


class ReferenceDataError(ValueError):
    """The packaged fixture is malformed."""


@dataclass(frozen=True)
class ReferenceLevels:
    kind: AugmentationKind
    unit: str
    max_level: float
    baseline: tuple
    adaptive: tuple


def load_reference_levels() -> list:
    """Parse and validate the packaged fixture; returns ReferenceLevels rows."""
    text = resources.files("adaptaug").joinpath("data/reference_levels.json").read_text()
    payload = json.loads(text)
    level_count = int(payload["level_count"])
    rows = []
    for entry in payload["entries"]:
        row = ReferenceLevels(
            kind=AugmentationKind(entry["kind"]),
            unit=str(entry["unit"]),
            max_level=float(entry["max_level"]),
            baseline=tuple(float(v) for v in entry["baseline"]),
            adaptive=tuple(float(v) for v in entry["adaptive"]),
        )
        for name, series in (("baseline", row.baseline), ("adaptive", row.adaptive)):
            if len(series) != level_count - 1:
                raise ReferenceDataError(
                    f"{row.kind.value}/{name}: expected {level_count - 1} interior levels, "
                    f"got {len(series)}"
                )
            if any(b <= a for a, b in zip(series, series[1:])):
                raise ReferenceDataError(f"{row.kind.value}/{name}: levels must strictly increase")
            if series[-1] >= row.max_level:
                raise ReferenceDataError(
                    f"{row.kind.value}/{name}: last interior level must stay below "
                    f"the maximum {row.max_level}"
                )
        rows.append(row)
    if not rows:
        raise ReferenceDataError("fixture has no entries")
    return rows
