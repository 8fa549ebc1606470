"""Shared attribute-value report builders.

Both the CLI and the HTTP API render these documents through the same
key-value writer, so the same query answered over either surface is byte
identical.
"""
from __future__ import annotations

from typing import Mapping, Sequence

from .models.bundle import ModelBundle, feature_importance
from .simulate import ROIResult, SimulationResult

__all__ = [
    "contests_overview",
    "contest_detail",
    "model_info",
    "simulation_report",
]


def contests_overview(
    index: Sequence[Mapping[str, str]], buckets: Mapping[str, str] | None = None
) -> dict[str, object]:
    doc: dict[str, object] = {"count": len(index)}
    for k, row in enumerate(index):
        p = f"contest.{k}"
        doc[f"{p}.id"] = row["contest_id"]
        doc[f"{p}.city"] = row["city_id"]
        doc[f"{p}.start"] = row["start"]
        doc[f"{p}.end"] = row["end"]
        doc[f"{p}.n_drivers"] = int(row["n_drivers"])
        doc[f"{p}.n_teams"] = int(row["n_teams"])
        if buckets is not None:
            doc[f"{p}.split"] = buckets.get(row["contest_id"], "excluded")
    return doc


def contest_detail(
    index_row: Mapping[str, str],
    manifest: Mapping[str, str],
    atet_row: Mapping[str, str] | None = None,
    bucket: str | None = None,
) -> dict[str, object]:
    doc: dict[str, object] = {
        "id": index_row["contest_id"],
        "city": index_row["city_id"],
        "start": index_row["start"],
        "end": index_row["end"],
        "signup_start": index_row["signup_start"],
    }
    if bucket is not None:
        doc["split"] = bucket
    for key in sorted(manifest):
        if key.startswith(("design.", "counts.", "city.")):
            doc[key] = manifest[key]
    if atet_row is not None:
        doc["atet"] = float(atet_row["atet"])
        doc["atet_se"] = float(atet_row["se"])
        doc["n_treated"] = int(atet_row["n_treated"])
        doc["n_control"] = int(atet_row["n_control"])
        doc["control_delta"] = float(atet_row["control_delta"])
    return doc


def model_info(
    bundle: ModelBundle,
    eval_summary: Mapping[str, str] | None = None,
    top_k: int = 15,
) -> dict[str, object]:
    p = bundle.params
    doc: dict[str, object] = {
        "family": p.family,
        "scaling": p.scaling,
        "train_rows": bundle.train_rows,
        "n_features": len(bundle.feature_names),
        "fingerprint": bundle.fingerprint,
    }
    if p.family in ("lasso", "ridge"):
        doc["lam"] = p.lam
        n_sel = bundle.n_selected()
        if n_sel is not None:
            doc["n_selected"] = n_sel
    if p.family == "gbrt":
        doc["n_trees"] = p.n_trees
        doc["max_depth"] = p.max_depth
        doc["learning_rate"] = p.learning_rate
        doc["subsample"] = p.subsample
    if bundle.val_rmse is not None:
        doc["val_rmse"] = bundle.val_rmse
    if eval_summary is not None:
        for key in (
            "final_test_rmse",
            "final_pct_reduction_vs_uniform",
            "final_p_vs_uniform",
            "uniform_test_rmse",
            "n_test_rows",
        ):
            if key in eval_summary:
                doc[key] = eval_summary[key]
    ranked = sorted(feature_importance(bundle), key=lambda kv: -abs(kv[1]))[:top_k]
    for k, (name, value) in enumerate(ranked):
        doc[f"importance.{k}.feature"] = name
        doc[f"importance.{k}.value"] = value
    return doc


def simulation_report(
    result: SimulationResult, roi: ROIResult | None = None
) -> dict[str, object]:
    doc = result.to_kv()
    if roi is not None:
        doc["roi"] = roi.roi
        doc["roi_ci_low"] = roi.ci_low
        doc["roi_ci_high"] = roi.ci_high
        doc["revenue_gain"] = roi.revenue_gain
        doc["prize_cost"] = roi.prize_cost
    return doc
