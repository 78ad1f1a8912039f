"""Result tables: per-species summary and the ablation slices of a grid."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from planktonad.errors import DomainError
from planktonad.evaluation import EvaluationReport
from planktonad.runner.pipeline import Combination, GridResult

TABLE_COLUMNS = ("AUC", "F1", "Prec", "Rec")


class TableStyle(str, enum.Enum):
    per_species = "per_species"
    fixed_model_ablation = "fixed_model_ablation"            # vary classifier
    fixed_extractor_ablation = "fixed_extractor_ablation"    # vary model (core and/or conv pair)
    fixed_classifier_ablation = "fixed_classifier_ablation"  # vary extractor


@dataclass(frozen=True)
class Table:
    title: str
    key_column: str
    rows: tuple[tuple[str, EvaluationReport], ...]
    best: int
    path: Path | None = None

    def display_rows(self) -> list[dict[str, str]]:
        out = []
        for i, (key, r) in enumerate(self.rows):
            out.append({self.key_column: key, "AUC": f"{r.auc:.2f}", "F1": f"{r.f1:.2f}",
                        "Prec": f"{r.precision:.2f}", "Rec": f"{r.recall:.2f}",
                        "best": "*" if i == self.best else ""})
        return out

    def to_text(self) -> str:
        lines = [self.title, f"{self.key_column:<40} " + " ".join(f"{c:>5}" for c in TABLE_COLUMNS)]
        for row in self.display_rows():
            cells = " ".join(f"{row[c]:>5}" for c in TABLE_COLUMNS)
            lines.append(f"{row[self.key_column]:<40} {cells} {row['best']}")
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=[self.key_column, *TABLE_COLUMNS, "best"])
            writer.writeheader()
            writer.writerows(self.display_rows())
        return path


def _best_index(rows: Sequence[tuple[str, EvaluationReport]]) -> int:
    return min(range(len(rows)), key=lambda i: (-rows[i][1].f1, rows[i][1].combination_id))


def _parsed(reports: Mapping[str, EvaluationReport]) -> list[tuple[Combination, EvaluationReport]]:
    return [(Combination.parse(cid), r) for cid, r in sorted(reports.items())]


def _slice(result: GridResult, style: TableStyle, fixed: Mapping[str, str]) -> Table:
    cells = _parsed(result.reports)
    best = Combination.parse(result.best().combination_id)
    want = {
        "core": fixed.get("core"), "conv_pair": fixed.get("conv_pair"),
        "extractor": fixed.get("extractor"), "classifier": fixed.get("classifier"),
    }
    if style is TableStyle.fixed_extractor_ablation:
        want["extractor"] = want["extractor"] or best.extractor.value
        want["classifier"] = want["classifier"] or best.classifier.value
        key, key_of = "Model", (lambda c: c.model_name)
        title = f"fixed extractor {want['extractor']} and classifier {want['classifier']}"
    elif style is TableStyle.fixed_classifier_ablation:
        want["core"] = want["core"] or best.core.value
        want["conv_pair"] = want["conv_pair"] or best.conv_pair.value
        want["classifier"] = want["classifier"] or best.classifier.value
        key, key_of = "Extractor", (lambda c: c.extractor.value)
        title = f"fixed model {want['conv_pair']}-{want['core']} and classifier {want['classifier']}"
    else:
        want["core"] = want["core"] or best.core.value
        want["conv_pair"] = want["conv_pair"] or best.conv_pair.value
        want["extractor"] = want["extractor"] or best.extractor.value
        key, key_of = "Classifier", (lambda c: c.classifier.value)
        title = f"fixed model {want['conv_pair']}-{want['core']} and extractor {want['extractor']}"
    for extra in ("core", "conv_pair"):
        if fixed.get(extra) and style is TableStyle.fixed_extractor_ablation:
            title += f", {extra} {fixed[extra]}"

    def matches(c: Combination) -> bool:
        return all(v is None or getattr(c, k).value == v for k, v in want.items())

    rows = tuple((key_of(c), r) for c, r in cells if matches(c))
    if not rows:
        missing = sorted(cid for cid, s in result.status.items()
                         if s != "done" and matches(Combination.parse(cid)))
        raise DomainError(f"no completed results for slice ({title}); missing ids: {missing or 'none recorded'}")
    return Table(f"{title} [{result.species}]", key, rows, _best_index(rows))


def _per_species(results: Sequence[GridResult], combination_id: str | None) -> Table:
    rows = []
    for result in results:
        if combination_id is None:
            report = result.best()
        elif combination_id in result.reports:
            report = result.reports[combination_id]
        else:
            raise DomainError(f"combination {combination_id!r} missing for species {result.species!r}")
        rows.append((result.species, report))
    title = "per species, " + (f"combination {combination_id}" if combination_id else "best combination each")
    return Table(title, "Species", tuple(rows), _best_index(rows))


def export_tables(results: GridResult | Sequence[GridResult], style: TableStyle | str, out_dir: str | Path,
                  fixed: Mapping[str, str] | None = None) -> list[Table]:
    """Write one CSV per table for ``style``; returns the tables with paths set.

    ``fixed`` pins dimensions of the slice (``core``, ``conv_pair``,
    ``extractor``, ``classifier``); unpinned fixed dimensions default to the
    best combination. ``per_species`` takes one GridResult per species and
    ``fixed["combination"]`` (default: each species' best).
    """
    try:
        style = TableStyle(style)
    except ValueError:
        raise DomainError(f"unknown table style {style!r}; expected one of {[s.value for s in TableStyle]}") from None
    grids = [results] if isinstance(results, GridResult) else list(results)
    if not grids or not any(g.reports for g in grids):
        raise DomainError("cannot export tables from empty results")
    fixed = dict(fixed or {})
    out_dir = Path(out_dir)
    if style is TableStyle.per_species:
        table = _per_species(grids, fixed.get("combination"))
        path = table.write_csv(out_dir / "per_species.csv")
        return [Table(table.title, table.key_column, table.rows, table.best, path)]
    tables = []
    for grid in grids:
        if not grid.reports:
            continue
        table = _slice(grid, style, fixed)
        tag = "_".join(v for v in (fixed.get("core"), fixed.get("conv_pair"), fixed.get("extractor"),
                                   fixed.get("classifier")) if v)
        name = f"{style.value}_{grid.species.replace(' ', '_')}" + (f"_{tag}" if tag else "") + ".csv"
        path = table.write_csv(out_dir / name)
        tables.append(Table(table.title, table.key_column, table.rows, table.best, path))
    return tables
