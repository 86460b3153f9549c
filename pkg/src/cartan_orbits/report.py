"""Per-sample strata tables with JSON summaries and CSV dumps."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


@dataclass
class StrataReport:
    """Labels and diagnostics per sample point plus a label summary.

    ``samples`` is a list of flat dictionaries; ``coordinates`` hold the point,
    ``label`` the P-type and the remaining keys are diagnostics.
    """

    scenario: str
    declared_labels: list[str] = field(default_factory=list)
    samples: list[dict] = field(default_factory=list)
    stratum_geometry: dict[str, str] = field(default_factory=dict)
    notes: dict[str, Any] = field(default_factory=dict)

    def add(self, coordinates, label: str, **diagnostics) -> None:
        row = {"coordinates": [float(c) for c in coordinates], "label": str(label)}
        row.update(diagnostics)
        self.samples.append(row)

    @property
    def counts(self) -> dict[str, int]:
        return dict(sorted(Counter(s["label"] for s in self.samples).items()))

    @property
    def observed_labels(self) -> set[str]:
        return {s["label"] for s in self.samples}

    def frequencies(self) -> dict[str, float]:
        total = max(1, len(self.samples))
        return {k: v / total for k, v in self.counts.items()}

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_samples": len(self.samples),
            "declared_labels": sorted(self.declared_labels),
            "observed_labels": sorted(self.observed_labels),
            "counts": self.counts,
            "stratum_geometry": dict(sorted(self.stratum_geometry.items())),
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True, default=float)

    def csv_text(self) -> str:
        """Per-sample rows; column order is fixed so equal inputs give equal bytes."""
        if not self.samples:
            return ""
        dim = len(self.samples[0]["coordinates"])
        extra = sorted({k for s in self.samples for k in s} - {"coordinates", "label"})
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(dim)] + ["label"] + extra)
        for s in self.samples:
            writer.writerow([_fmt(c) for c in s["coordinates"]] + [s["label"]]
                            + [_fmt(s.get(k)) for k in extra])
        return buf.getvalue()

    def write(self, directory: Path | str, stem: str | None = None) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or self.scenario
        json_path = directory / f"{stem}.json"
        csv_path = directory / f"{stem}.csv"
        json_path.write_text(self.to_json())
        csv_path.write_text(self.csv_text())
        return json_path, csv_path
