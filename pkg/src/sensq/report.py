"""Report emission: run-directory summaries and encoding-size tables."""

from __future__ import annotations

import json
from pathlib import Path

from .encode import DeltaMode, QuerySpec, encode_query
from .mlp import Mlp
from .profiling import FixPlan

SCHEMA_VERSION = 1
REPORT_COLUMNS = ("network size", "iter.#", "sensitivity", "SIP", "total runtime (s)")


def scaling_report(models: list[Mlp]) -> list[dict]:
    """Size of the standard all-free query per model.

    Parameter and ReLU-node counts are architecture-determined; the script
    line/byte counts measure this encoder on a neutral mid-box base sample.
    """
    rows = []
    for m in models:
        spec = QuerySpec(
            x0=(0.5,) * m.input_width,
            gamma_radius=0.2,
            epsilon_z=1.0,
            theta=1e-300,
            delta_mode=DeltaMode.EXISTENTIAL,
        )
        script = encode_query(m, spec, FixPlan.all_free(m))
        rows.append(
            {
                "dims": m.dims_label,
                "n_params": m.n_params,
                "n_relu_nodes": m.n_relu_nodes,
                "script_lines": len(script.text.splitlines()),
                "script_bytes": len(script.text.encode()),
            }
        )
    return rows


def render_markdown(headers, rows) -> str:
    def fmt(cell):
        if isinstance(cell, float):
            return f"{cell:.6g}"
        return "-" if cell is None else str(cell)

    lines = [
        "| " + " | ".join(headers) + " |",
        "| " + " | ".join("---" for _ in headers) + " |",
    ]
    for row in rows:
        lines.append("| " + " | ".join(fmt(c) for c in row) + " |")
    return "\n".join(lines) + "\n"


def _load_json(path: Path) -> dict | None:
    return json.loads(path.read_text()) if path.exists() else None


def build_run_report(run_dir: str | Path) -> dict:
    """Assemble the run report from the artifacts a search/end2end run wrote.

    Logical results and wall times stay in separate sub-objects so that
    byte-level comparisons of reproduced runs can ignore timing.
    """
    run_dir = Path(run_dir)
    meta = _load_json(run_dir / "meta.json") or {}
    outcome = _load_json(run_dir / "outcome.json") or {}
    verify = _load_json(run_dir / "verify.json") or {}
    results = outcome.get("results", {})
    suspects = verify.get("suspects", {})
    sensitivity = suspects.get("perturbed", {}).get("beta")
    return {
        "schema_version": SCHEMA_VERSION,
        "columns": list(REPORT_COLUMNS),
        "results": {
            "network_size": meta.get("network"),
            "status": results.get("status"),
            "iteration": results.get("iteration"),
            "sensitivity": sensitivity,
            "sip": verify.get("sip"),
            "suspects": suspects,
            "theta": verify.get("theta"),
            "seed": meta.get("seed"),
        },
        "timing": outcome.get("timing", {}),
    }


def write_run_report(run_dir: str | Path) -> dict:
    """Write report.json and report.md into the run directory."""
    run_dir = Path(run_dir)
    report = build_run_report(run_dir)
    r, t = report["results"], report["timing"]
    rows = [
        (
            r.get("network_size"),
            r.get("iteration"),
            r.get("sensitivity"),
            r.get("sip"),
            t.get("total_runtime_s"),
        )
    ]
    md = [
        "# Sensitive-sample run report",
        "",
        f"status: **{r.get('status')}**",
        "",
        render_markdown(REPORT_COLUMNS, rows),
    ]
    if r.get("suspects"):
        md.append("## Suspect models")
        md.append("")
        md.append(
            render_markdown(
                ("suspect", "beta", "flagged"),
                [
                    (name, v.get("beta"), v.get("flagged"))
                    for name, v in sorted(r["suspects"].items())
                ],
            )
        )
    (run_dir / "report.json").write_text(json.dumps(report, indent=1))
    (run_dir / "report.md").write_text("\n".join(md))
    return report
