"""Run-report emission: machine JSON, delimited CSV, a human table and a
residual chart rendered to a file next to the other outputs."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .scenario import RunResult

__all__ = ["machine_json", "write_outputs", "human_table", "render_figure"]


def machine_dict(result: RunResult, timestamp: str | None = None) -> dict:
    doc = {
        "scenario": result.scenario,
        "seed": result.seed,
        "regime": list(result.regime),
        "environment": result.environment,
        "summary": result.counts,
        "reports": [r.to_dict() for r in result.reports],
    }
    if timestamp is not None:
        doc["timestamp"] = timestamp
    return doc


def machine_json(result: RunResult, timestamp: str | None = None) -> str:
    return json.dumps(machine_dict(result, timestamp), sort_keys=True, indent=2) + "\n"


def csv_rows(result: RunResult) -> list[list]:
    rows = [["equation_id", "tags", "residual_inf", "residual_rel", "tol_rel", "tol_abs", "verdict"]]
    for r in result.reports:
        rows.append(
            [
                r.equation_id,
                "|".join(r.hypothesis_tags),
                f"{r.residual_inf:.6e}",
                f"{r.residual_rel:.6e}",
                f"{r.tol_rel:.1e}",
                f"{r.tol_abs:.1e}",
                r.verdict,
            ]
        )
    return rows


def human_table(result: RunResult) -> str:
    rows = csv_rows(result)
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    out = io.StringIO()
    out.write(f"scenario: {result.scenario}   seed: {result.seed}   regime: {','.join(result.regime) or '-'}\n")
    sep = "-+-".join("-" * w for w in widths)
    for k, row in enumerate(rows):
        out.write(" | ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
        if k == 0:
            out.write(sep + "\n")
    c = result.counts
    out.write(f"{c['pass']}/{c['total']} checks passed" + (f", {c['fail']} FAILED" if c["fail"] else "") + "\n")
    return out.getvalue()


def render_figure(result: RunResult, path: Path) -> None:
    """Horizontal residual chart: one bar per check on a log scale, with
    the tolerance marked."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ids = [r.equation_id for r in result.reports]
    if not ids:
        return
    floor = 1e-18
    res = np.array([max(r.residual_rel, floor) for r in result.reports])
    tol = np.array([max(r.tol_rel, floor) for r in result.reports])
    colors = ["#2a7e43" if r.passed else "#b03030" for r in result.reports]
    pos = np.arange(len(ids))
    height = max(2.4, 0.34 * len(ids) + 1.2)
    fig, ax = plt.subplots(figsize=(7.2, height))
    ax.barh(pos, res, color=colors, height=0.62, zorder=2)
    ax.scatter(tol, pos, marker="|", s=160, color="#333333", zorder=3, label="tolerance")
    ax.set_xscale("log")
    ax.set_xlim(floor, 10 ** np.ceil(np.log10(max(res.max(), tol.max()) * 3)))
    ax.set_yticks(pos)
    ax.set_yticklabels(ids)
    ax.invert_yaxis()
    ax.set_xlabel("relative residual")
    ax.set_title(f"{result.scenario} (seed {result.seed})")
    ax.grid(axis="x", alpha=0.3, zorder=0)
    ax.legend(loc="lower right", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def write_outputs(
    result: RunResult,
    outdir: str | Path,
    timestamp: str | None = None,
    figures: bool = True,
) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = result.scenario
    paths = {}
    jpath = outdir / f"{stem}.json"
    jpath.write_text(machine_json(result, timestamp), encoding="utf-8")
    paths["json"] = jpath
    cpath = outdir / f"{stem}.csv"
    with open(cpath, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(csv_rows(result))
    paths["csv"] = cpath
    if figures:
        fpath = outdir / f"{stem}_residuals.png"
        render_figure(result, fpath)
        paths["figure"] = fpath
    return paths
