"""Run evaluation: metric tables over a finished run's artifacts vs gold.

The report mirrors three tables — requirements diversity, model quality
against gold, and SRS quality against gold — each with one row per system
and an `Ave` row, written as an aligned text table, a delimited record
file, and one bar-chart figure per table.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from reqforge import plantuml
from reqforge.agents import parse_user_requirements
from reqforge.gateway import Gateway
from reqforge.metrics.geometry import diversity
from reqforge.metrics.judge import CRITERIA, g_eval
from reqforge.metrics.modelscore import model_prf
from reqforge.metrics.textscores import bleu, semantic_similarity
from reqforge.pool import ArtifactKind, ArtifactPool

AVERAGE_LABEL = "Ave"
PROJECTION_NOTE = "l2-normalize; pca k=3 (k=2 under 4 items); mdc in full dimension"

#: section name -> (title, column names); column names are the report's contract
SECTION_LAYOUT = (
    ("diversity", "Requirements diversity", ("CHV", "MDC")),
    ("model", "Requirements model vs gold", ("F1", "BLEU", "semantic_similarity")),
    ("srs", "SRS vs gold", ("BLEU", "semantic_similarity",
                            "Completeness", "Correctness", "Cohesiveness")),
)

GOLD_FILES = {"model": "model.puml", "srs": "srs.md", "url": "url.txt"}


class MetricsError(Exception):
    pass


class MissingGold(MetricsError):
    pass


@dataclass
class TableSection:
    name: str
    title: str
    columns: tuple[str, ...]
    rows: dict[str, dict[str, float | None]] = field(default_factory=dict)

    def average(self) -> dict[str, float | None]:
        out: dict[str, float | None] = {}
        for column in self.columns:
            values = [row[column] for row in self.rows.values()
                      if row.get(column) is not None]
            out[column] = sum(values) / len(values) if values else None
        return out


@dataclass
class MetricReport:
    sections: tuple[TableSection, ...]
    metadata: dict[str, str]

    def section(self, name: str) -> TableSection:
        for section in self.sections:
            if section.name == name:
                return section
        raise KeyError(name)

    def to_record(self) -> dict:
        return {
            "metadata": dict(self.metadata),
            "sections": [
                {"name": section.name, "title": section.title,
                 "columns": list(section.columns),
                 "rows": {system: dict(row)
                          for system, row in section.rows.items()},
                 "average": section.average()}
                for section in self.sections
            ],
        }

    def render_text(self) -> str:
        lines = ["metric report", ""]
        for key in sorted(self.metadata):
            lines.append(f"{key}: {self.metadata[key]}")
        for section in self.sections:
            lines.append("")
            lines.append(section.title)
            labels = list(section.rows) + [AVERAGE_LABEL]
            body = {**section.rows, AVERAGE_LABEL: section.average()}
            name_width = max(len("system"), *(len(label) for label in labels))
            widths = [max(len(column), 10) for column in section.columns]
            header = "  ".join(["system".ljust(name_width)]
                               + [column.rjust(width) for column, width
                                  in zip(section.columns, widths)])
            lines.append(header)
            for label in labels:
                cells = [label.ljust(name_width)]
                for column, width in zip(section.columns, widths):
                    value = body[label].get(column)
                    cell = "-" if value is None else f"{value:.6f}"
                    cells.append(cell.rjust(width))
                lines.append("  ".join(cells))
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["table", "system_id", "metric", "value"])
        for section in self.sections:
            body = {**section.rows, AVERAGE_LABEL: section.average()}
            for label, row in body.items():
                for column in section.columns:
                    value = row.get(column)
                    writer.writerow([
                        section.name, label, column,
                        "" if value is None else format(value, ".17g")])
        return buffer.getvalue()


def _config_hash() -> str:
    settings = {
        "sections": [(name, columns) for name, _, columns in SECTION_LAYOUT],
        "projection": PROJECTION_NOTE,
        "bleu": "bleu-4, case-folded, add-one smoothing on zero-match orders",
        "judge_scale": "integer 1-5, one deterministic call per criterion",
    }
    digest = hashlib.sha256(
        json.dumps(settings, sort_keys=True).encode("utf-8")).hexdigest()
    return digest[:12]


def normalize_metrics(metrics) -> set[str] | None:
    """Lowercased requested column names; None means everything."""
    if metrics is None:
        return None
    known = {column.lower() for _, _, columns in SECTION_LAYOUT
             for column in columns}
    requested = {str(name).strip().lower() for name in metrics if str(name).strip()}
    unknown = requested - known
    if unknown:
        raise MetricsError(
            f"unknown metrics {sorted(unknown)}; known: {sorted(known)}")
    if not requested:
        raise MetricsError("the metric filter is empty")
    return requested


def artifacts_from_pool(pool: ArtifactPool) -> dict[ArtifactKind, str]:
    out: dict[ArtifactKind, str] = {}
    for kind in (ArtifactKind.USER_REQUIREMENTS_LIST,
                 ArtifactKind.REQUIREMENTS_MODEL, ArtifactKind.SRS):
        artifact = pool.latest(kind)
        if artifact is not None:
            out[kind] = artifact.content
    return out


def evaluate_run(artifacts: Mapping[ArtifactKind, str], gold_root,
                 system_id: str,
                 embed_fn: Callable[[Sequence[str]], Sequence[Sequence[float]]],
                 judge: Gateway | None = None,
                 metrics=None, embed_model_name: str = "hash-embedding",
                 judge_model_name: str = "") -> MetricReport:
    """Score one run's final artifacts; gold lives at gold_root/system_id/."""
    requested = normalize_metrics(metrics)

    def wants(*columns: str) -> bool:
        return requested is None or any(
            column.lower() in requested for column in columns)

    gold_dir = Path(gold_root) / system_id
    needs_gold = wants("F1", "BLEU", "semantic_similarity",
                       *CRITERIA)
    if needs_gold and not gold_dir.is_dir():
        raise MissingGold(f"no gold directory {gold_dir}")

    sections: list[TableSection] = []
    for name, title, all_columns in SECTION_LAYOUT:
        columns = tuple(column for column in all_columns
                        if requested is None or column.lower() in requested)
        if not columns:
            continue
        row: dict[str, float | None] = {column: None for column in columns}
        if name == "diversity":
            url_text = artifacts.get(ArtifactKind.USER_REQUIREMENTS_LIST)
            if url_text is None:
                raise MetricsError("the run has no UserRequirementsList")
            items = [item.text for item in parse_user_requirements(url_text)]
            result = diversity(items, embed_fn)
            if "CHV" in row:
                row["CHV"] = result.chv
            if "MDC" in row:
                row["MDC"] = result.mdc
        elif name == "model":
            gold_path = gold_dir / GOLD_FILES["model"]
            predicted = artifacts.get(ArtifactKind.REQUIREMENTS_MODEL)
            if gold_path.is_file() and predicted is not None:
                gold_text = gold_path.read_text(encoding="utf-8")
                if "F1" in row:
                    scores = model_prf(plantuml.parse(gold_text),
                                       plantuml.parse(predicted))
                    row["F1"] = scores.overall.f1
                if "BLEU" in row:
                    row["BLEU"] = bleu(predicted, gold_text)
                if "semantic_similarity" in row:
                    row["semantic_similarity"] = semantic_similarity(
                        predicted, gold_text, embed_fn)
        elif name == "srs":
            gold_path = gold_dir / GOLD_FILES["srs"]
            candidate = artifacts.get(ArtifactKind.SRS)
            if gold_path.is_file() and candidate is not None:
                gold_text = gold_path.read_text(encoding="utf-8")
                if "BLEU" in row:
                    row["BLEU"] = bleu(candidate, gold_text)
                if "semantic_similarity" in row:
                    row["semantic_similarity"] = semantic_similarity(
                        candidate, gold_text, embed_fn)
                judged = [criterion for criterion in CRITERIA
                          if criterion in row]
                if judged and judge is None:
                    raise MetricsError(
                        f"a judge gateway is required for {judged}")
                for criterion in judged:
                    row[criterion] = float(
                        g_eval(candidate, gold_text, criterion, judge).score)
        sections.append(TableSection(name=name, title=title, columns=columns,
                                     rows={system_id: row}))

    if all(value is None
           for section in sections
           for row in section.rows.values()
           for value in row.values()):
        raise MissingGold(
            f"no gold artifacts under {gold_dir} for the requested metrics")

    metadata = {
        "embedding_model": embed_model_name,
        "judge_model": judge_model_name,
        "config_hash": _config_hash(),
        "diversity_projection": PROJECTION_NOTE,
    }
    return MetricReport(sections=tuple(sections), metadata=metadata)


def write_report(report: MetricReport, out_dir) -> dict[str, Path]:
    """report.txt + report.csv + one figure per table under figures/."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    text_path = out / "report.txt"
    text_path.write_text(report.render_text(), encoding="utf-8")
    paths["text"] = text_path
    csv_path = out / "report.csv"
    csv_path.write_text(report.render_csv(), encoding="utf-8")
    paths["csv"] = csv_path

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    figures_dir = out / "figures"
    figures_dir.mkdir(exist_ok=True)
    for section in report.sections:
        average = section.average()
        labels = [column for column in section.columns
                  if average[column] is not None]
        if not labels:
            continue
        values = [average[column] for column in labels]
        figure, axes = plt.subplots(figsize=(6.4, 3.4))
        axes.bar(labels, values, color="#4878a8")
        axes.set_title(section.title)
        axes.set_ylabel("score")
        axes.tick_params(axis="x", labelrotation=18)
        figure.tight_layout()
        figure_path = figures_dir / f"{section.name}.png"
        figure.savefig(figure_path, dpi=120)
        plt.close(figure)
        paths[f"figure:{section.name}"] = figure_path
    return paths
