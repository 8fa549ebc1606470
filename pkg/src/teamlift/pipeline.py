"""End-to-end run orchestration over a plain-file artifact tree.

Each stage reads only artifacts written by earlier stages and writes its own
under the run directory, so stages can be rerun, resumed, or inspected
independently:

    out/
      config.kv                 effective configuration echo
      dataset/contests.tsv      contest index (periods, counts)
      dataset/contests/<id>/    tables + manifest + ground-truth sidecar
      ite/ite.tsv, atet.tsv     estimated individual and average effects
      features/matrix.tsv ...   assembled feature matrix and schema
      splits/splits.kv          contest-level temporal split
      models/...                leaderboard, per-family refits, final model
      eval/...                  test-window comparison and error analysis
      simulate/...              design enumeration with ROI
      run_summary.kv            artifact list with content digests

All artifacts are deterministic functions of (config, seed): rerunning a
stage with the same inputs reproduces files byte for byte.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio, did, features, simulate as sim
from .config import RunConfig, save_config
from .errors import ConfigError, GenerationError
from .evaluate import SplitSpec, Split, compare_models, error_analysis, time_split
from .models import (
    GBRTGrid,
    LinearGrid,
    feature_importance,
    grid_search,
    load_bundle,
    refit_on_train_plus_val,
    save_bundle,
)
from .panels import Period
from .synthgen import (
    METRICS,
    ContestDesign,
    design_from_manifest,
    generate_city_pool,
    generate_contest,
    read_contest_dir,
    read_manifest,
    write_contest_dir,
)

log = logging.getLogger(__name__)

__all__ = ["Paths", "run_stage", "run_pipeline", "STAGES"]

STAGES = ("generate", "estimate", "featurize", "train", "evaluate", "simulate")

# Fixed tags keep every stage's random stream independent of the others.
_TAG_CITY, _TAG_DESIGN, _TAG_CONTEST, _TAG_TRAIN, _TAG_SIM = 11, 12, 13, 31, 51

CONTEST_INDEX_HEADER = [
    "contest_id",
    "city_id",
    "start",
    "end",
    "signup_start",
    "bucket",
    "n_drivers",
    "n_teams",
    "n_solo",
    "n_overflow",
]
ATET_HEADER = ["contest_id", "atet", "se", "n_treated", "n_control", "control_delta"]


@dataclass(frozen=True)
class Paths:
    out: Path

    @property
    def config(self) -> Path:
        return self.out / "config.kv"

    @property
    def dataset_dir(self) -> Path:
        return self.out / "dataset"

    @property
    def contest_index(self) -> Path:
        return self.dataset_dir / "contests.tsv"

    def contest_dir(self, contest_id: str) -> Path:
        return self.dataset_dir / "contests" / contest_id

    @property
    def ite_table(self) -> Path:
        return self.out / "ite" / "ite.tsv"

    @property
    def atet_table(self) -> Path:
        return self.out / "ite" / "atet.tsv"

    @property
    def matrix(self) -> Path:
        return self.out / "features" / "matrix.tsv"

    @property
    def schema(self) -> Path:
        return self.out / "features" / "schema.tsv"

    @property
    def splits(self) -> Path:
        return self.out / "splits" / "splits.kv"

    @property
    def models_dir(self) -> Path:
        return self.out / "models"

    @property
    def leaderboard(self) -> Path:
        return self.models_dir / "leaderboard.tsv"

    def family_model(self, family: str) -> Path:
        return self.models_dir / f"best_{family}.json"

    @property
    def final_model(self) -> Path:
        return self.models_dir / "final_model.json"

    @property
    def importance(self) -> Path:
        return self.models_dir / "importance.tsv"

    @property
    def eval_dir(self) -> Path:
        return self.out / "eval"

    @property
    def eval_leaderboard(self) -> Path:
        return self.eval_dir / "leaderboard.tsv"

    @property
    def error_table(self) -> Path:
        return self.eval_dir / "error_analysis.tsv"

    @property
    def eval_summary(self) -> Path:
        return self.eval_dir / "summary.kv"

    @property
    def sim_dir(self) -> Path:
        return self.out / "simulate"

    @property
    def sim_results(self) -> Path:
        return self.sim_dir / "results.tsv"

    @property
    def sim_summary(self) -> Path:
        return self.sim_dir / "summary.kv"

    @property
    def run_summary(self) -> Path:
        return self.out / "run_summary.kv"

    def stage_marker(self, stage: str) -> Path:
        return {
            "generate": self.contest_index,
            "estimate": self.ite_table,
            "featurize": self.matrix,
            "train": self.final_model,
            "evaluate": self.eval_summary,
            "simulate": self.sim_summary,
        }[stage]


def child_seed(base: int, *tags: int) -> int:
    ss = np.random.SeedSequence([base & 0xFFFFFFFFFFFFFFFF, *tags])
    return int(ss.generate_state(1, np.uint64)[0])


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise ConfigError(f"missing artifact {path}; run the {producer!r} stage first")
    return path


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def _sample_design(cfg: RunConfig, rng: np.random.Generator, window: tuple[dt.date, dt.date]) -> ContestDesign:
    g = cfg.generate
    team_size = int(rng.choice(g.team_size_options))
    group_size = int(rng.choice(g.group_size_options))
    days = int(rng.choice(g.contest_days_options))
    signup = int(rng.choice(g.signup_days_options))
    p1 = float(rng.uniform(*g.first_prize_range))
    fifth = g.fifth_prize_frac * p1 if rng.random() < g.reward_fifth_prob else 0.0
    prizes = (p1, *(p1 * f for f in g.prize_decay), fifth)
    bonus = bool(rng.random() < g.captain_bonus_prob)
    metric = str(rng.choice(METRICS, p=g.metric_probs))
    lo, hi = window
    span = (hi - lo).days
    if span < 0:
        raise GenerationError(f"window {lo}..{hi} cannot hold a {days}-day contest")
    start = lo + dt.timedelta(days=int(rng.integers(0, span + 1)))
    return ContestDesign(
        team_size=team_size,
        group_size=group_size,
        contest_days=days,
        start_date=start,
        signup_days=signup,
        prize_schedule=prizes,
        captain_bonus=bonus,
        captain_bonus_amount=g.captain_bonus_frac * p1 if bonus else 0.0,
        exclude_worst_member=bool(rng.random() < g.exclude_worst_prob),
        performance_metric=metric,
    )


def stage_generate(cfg: RunConfig, paths: Paths, force: bool = False) -> None:
    if paths.contest_index.exists():
        if not force:
            raise ConfigError(f"{paths.dataset_dir} already holds a dataset; use force to regenerate")
        shutil.rmtree(paths.dataset_dir)
    g, s = cfg.generate, cfg.split
    # Contest start windows per split bucket; contests must END inside the
    # train/val windows, so their start range is trimmed by contest length.
    buckets: list[tuple[str, tuple[dt.date, dt.date]]] = []
    buckets += [("train", (g.train_start, s.train_end))] * g.train_contests_per_city
    buckets += [("val", (s.val_start, s.val_end))] * g.val_contests_per_city
    buckets += [("test", (s.test_start, g.test_last_start))] * g.test_contests_per_city

    index_rows = []
    dgp = cfg.dgp()
    for i in range(g.n_cities):
        city_id = f"c{i + 1:02d}"
        pool = generate_city_pool(cfg.city, g.drivers_per_city, child_seed(cfg.seed, _TAG_CITY, i), city_id)
        for j, (bucket, window) in enumerate(buckets):
            rng = np.random.default_rng(child_seed(cfg.seed, _TAG_DESIGN, i, j))
            lo, hi = window
            if bucket in ("train", "val"):
                # leave room so the contest ends inside the bucket window
                max_days = max(cfg.generate.contest_days_options)
                hi = hi - dt.timedelta(days=max_days - 1)
            design = _sample_design(cfg, rng, (lo, hi))
            picked = rng.choice(len(pool.drivers), size=g.signups_per_contest, replace=False)
            signups = sorted((pool.drivers[k] for k in picked), key=lambda d: d.id)
            contest_id = f"{city_id}-k{j:02d}"
            ds, truth = generate_contest(
                pool.city,
                design,
                signups,
                dgp,
                child_seed(cfg.seed, _TAG_CONTEST, i, j),
                pool.history,
                contest_id=contest_id,
            )
            write_contest_dir(ds, truth, paths.contest_dir(contest_id))
            t1 = ds.contest_period()
            index_rows.append(
                (
                    contest_id,
                    city_id,
                    t1.start,
                    t1.end,
                    ds.signup_start(),
                    bucket,
                    len(ds.drivers),
                    len(ds.teams),
                    len(ds.solo_ids),
                    len(ds.overflow_ids),
                )
            )
            log.info("generated %s: %d teams, %d solo", contest_id, len(ds.teams), len(ds.solo_ids))
    dataio.write_table(paths.contest_index, CONTEST_INDEX_HEADER, index_rows)


def read_contest_index(paths: Paths) -> list[dict[str, str]]:
    header, rows = dataio.read_table(_require(paths.contest_index, "generate"))
    return [dict(zip(header, row)) for row in rows]


def _index_periods(index: list[dict[str, str]]) -> list[tuple[str, Period]]:
    return [
        (
            row["contest_id"],
            Period(dt.date.fromisoformat(row["start"]), dt.date.fromisoformat(row["end"])),
        )
        for row in index
    ]


# ---------------------------------------------------------------------------
# estimate / featurize
# ---------------------------------------------------------------------------


def stage_estimate(cfg: RunConfig, paths: Paths) -> None:
    index = read_contest_index(paths)
    all_records: list[did.ITERecord] = []
    atet_rows = []
    for row in index:
        ds, _ = read_contest_dir(paths.contest_dir(row["contest_id"]))
        t1 = ds.contest_period()
        t0 = did.baseline_period(t1, ds.signup_start())
        controls = [ds.panels[d] for d in ds.solo_ids if d in ds.panels]
        trend = did.control_trend(ds.contest_id, controls, t0, t1)
        records = did.estimate_ite(ds)
        atet, se = did.atet_with_se(records, trend)
        atet_rows.append((ds.contest_id, atet, se, len(records), trend.n_control, trend.value))
        all_records.extend(records)
    all_records.sort(key=lambda r: (r.contest_id, r.driver_id))
    paths.ite_table.parent.mkdir(parents=True, exist_ok=True)
    did.write_ite_table(paths.ite_table, all_records)
    dataio.write_table(paths.atet_table, ATET_HEADER, atet_rows)


def stage_featurize(cfg: RunConfig, paths: Paths) -> None:
    index = read_contest_index(paths)
    records = did.read_ite_table(_require(paths.ite_table, "estimate"))
    datasets = [read_contest_dir(paths.contest_dir(row["contest_id"]))[0] for row in index]
    matrix = features.assemble_matrix(datasets, records)
    paths.matrix.parent.mkdir(parents=True, exist_ok=True)
    features.write_matrix(matrix, paths.matrix)
    features.write_schema(matrix.schema, paths.schema)


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _split_spec(cfg: RunConfig) -> SplitSpec:
    s = cfg.split
    return SplitSpec(
        train_end=s.train_end, val_start=s.val_start, val_end=s.val_end, test_start=s.test_start
    )


def write_split(paths: Paths, split: Split) -> None:
    doc: dict[str, object] = {
        "train_ids": list(split.train_ids),
        "val_ids": list(split.val_ids),
        "test_ids": list(split.test_ids),
        "n_excluded": len(split.excluded),
    }
    for k, (cid, reason) in enumerate(split.excluded):
        doc[f"excluded.{k}.contest_id"] = cid
        doc[f"excluded.{k}.reason"] = reason
    paths.splits.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_kv(paths.splits, doc)


def read_split(paths: Paths) -> Split:
    raw = dataio.read_kv(_require(paths.splits, "train"))

    def ids(key: str) -> tuple[str, ...]:
        text = raw.get(key, "")
        return tuple(x for x in text.split(",") if x)

    excluded = []
    for k in range(int(raw.get("n_excluded", "0"))):
        excluded.append((raw[f"excluded.{k}.contest_id"], raw[f"excluded.{k}.reason"]))
    return Split(
        train_ids=ids("train_ids"),
        val_ids=ids("val_ids"),
        test_ids=ids("test_ids"),
        excluded=tuple(excluded),
    )


LEADERBOARD_HEADER = [
    "family",
    "candidate",
    "scaling",
    "lam",
    "n_trees",
    "max_depth",
    "learning_rate",
    "subsample",
    "val_rmse",
    "n_selected",
    "chosen",
]


def stage_train(cfg: RunConfig, paths: Paths) -> None:
    matrix = features.read_matrix(_require(paths.matrix, "featurize"))
    index = read_contest_index(paths)
    split = time_split(_index_periods(index), _split_spec(cfg))
    for name, ids in (("train", split.train_ids), ("val", split.val_ids)):
        if not ids:
            raise ConfigError(f"temporal split left no {name} contests")
    write_split(paths, split)
    train_m = matrix.subset_by_contests(split.train_ids)
    val_m = matrix.subset_by_contests(split.val_ids)

    t = cfg.train
    linear_grid = LinearGrid(
        scalings=t.linear_scalings, n_lambdas=t.lasso_n_lambdas, lam_min_ratio=t.lam_min_ratio
    )
    gbrt_grid = GBRTGrid(
        n_trees=t.gbrt_n_trees,
        max_depth=t.gbrt_max_depth,
        learning_rate=t.gbrt_learning_rate,
        subsample=t.gbrt_subsample,
        min_samples_leaf=t.gbrt_min_samples_leaf,
    )
    rows = []
    best_by_family = {}
    paths.models_dir.mkdir(parents=True, exist_ok=True)
    for fam_idx, family in enumerate(t.families):
        grid = {"lasso": linear_grid, "ridge": linear_grid, "gbrt": gbrt_grid}.get(family)
        result = grid_search(
            train_m, val_m, family, grid, seed=child_seed(cfg.seed, _TAG_TRAIN, fam_idx)
        )
        refit = refit_on_train_plus_val(train_m, val_m, result.best)
        refit.val_rmse = result.best_row().val_rmse
        save_bundle(refit, paths.family_model(family))
        best_by_family[family] = result.best_row().val_rmse
        for row in result.rows:
            p = row.params
            rows.append(
                (
                    family,
                    p.describe(),
                    p.scaling,
                    p.lam,
                    p.n_trees if family == "gbrt" else "",
                    p.max_depth if family == "gbrt" else "",
                    p.learning_rate if family == "gbrt" else "",
                    p.subsample if family == "gbrt" else "",
                    row.val_rmse,
                    "" if row.n_selected is None else row.n_selected,
                    p == result.best,
                )
            )
        log.info("%s: best %s val_rmse=%.4f", family, result.best.describe(), best_by_family[family])
    dataio.write_table(paths.leaderboard, LEADERBOARD_HEADER, rows)

    winner = min(t.families, key=lambda f: (best_by_family[f], t.families.index(f)))
    final = load_bundle(paths.family_model(winner))
    save_bundle(final, paths.final_model)
    ranked = sorted(feature_importance(final), key=lambda kv: -abs(kv[1]))
    dataio.write_table(
        paths.importance,
        ["rank", "feature", "importance"],
        [(k + 1, name, value) for k, (name, value) in enumerate(ranked)],
    )


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


EVAL_HEADER = [
    "family",
    "test_rmse",
    "pct_reduction_vs_uniform",
    "p_vs_uniform",
    "val_rmse",
    "n_selected",
    "n_rows",
]
ERROR_HEADER = [
    "feature",
    "kind",
    "stat_signed",
    "p_signed",
    "stat_abs",
    "p_abs",
    "undefined",
    "note",
]


def stage_evaluate(cfg: RunConfig, paths: Paths) -> None:
    matrix = features.read_matrix(_require(paths.matrix, "featurize"))
    split = read_split(paths)
    if not split.test_ids:
        raise ConfigError("temporal split left no test contests")
    test_m = matrix.subset_by_contests(split.test_ids)
    preds = {}
    bundles = {}
    for family in cfg.train.families:
        bundle = load_bundle(_require(paths.family_model(family), "train"))
        bundles[family] = bundle
        preds[family] = bundle.predict(test_m)
    comparison = compare_models(
        preds,
        test_m.y,
        baseline="uniform",
        n_rounds=cfg.evaluate.permutation_rounds,
        seed=child_seed(cfg.seed, 41),
    )
    paths.eval_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for c in comparison:
        b = bundles[c.family]
        n_sel = b.n_selected()
        rows.append(
            (
                c.family,
                c.rmse,
                c.pct_reduction_vs_baseline,
                c.p_vs_baseline,
                "" if b.val_rmse is None else b.val_rmse,
                "" if n_sel is None else n_sel,
                c.n_rows,
            )
        )
    dataio.write_table(paths.eval_leaderboard, EVAL_HEADER, rows)

    final = load_bundle(_require(paths.final_model, "train"))
    report = error_analysis(test_m, final.predict(test_m))
    dataio.write_table(
        paths.error_table,
        ERROR_HEADER,
        [
            (r.feature, r.kind, r.stat_signed, r.p_signed, r.stat_abs, r.p_abs, r.undefined, r.note)
            for r in report.rows
        ],
    )
    winner = comparison[0]
    uniform_rmse = next(c.rmse for c in comparison if c.family == "uniform")
    final_family = final.params.family
    final_row = next(c for c in comparison if c.family == final_family)
    dataio.write_kv(
        paths.eval_summary,
        {
            "final_family": final_family,
            "final_test_rmse": final_row.rmse,
            "final_pct_reduction_vs_uniform": final_row.pct_reduction_vs_baseline,
            "final_p_vs_uniform": final_row.p_vs_baseline,
            "best_test_family": winner.family,
            "best_test_rmse": winner.rmse,
            "uniform_test_rmse": uniform_rmse,
            "n_test_rows": test_m.n_rows,
            "n_test_contests": len(split.test_ids),
        },
    )


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


SIM_HEADER = [
    "contest_id",
    "noise_level",
    "rank",
    "design",
    "ate",
    "ci_low",
    "ci_high",
    "mean_prediction",
    "roi",
    "roi_ci_low",
    "roi_ci_high",
    "prize_cost",
    "is_best",
    "is_worst",
]


def _prototype_ids(matrix: features.FeatureMatrix, test_ids: tuple[str, ...], k: int) -> list[str]:
    sizes = {cid: 0 for cid in test_ids}
    for cid, _ in matrix.keys:
        if cid in sizes:
            sizes[cid] += 1
    ranked = sorted(test_ids, key=lambda c: (-sizes[c], c))
    return list(ranked[:k])


def stage_simulate(cfg: RunConfig, paths: Paths) -> None:
    matrix = features.read_matrix(_require(paths.matrix, "featurize"))
    split = read_split(paths)
    bundle = load_bundle(_require(paths.final_model, "train"))
    if not split.test_ids:
        raise ConfigError("no test contests to simulate")
    protos = _prototype_ids(matrix, split.test_ids, cfg.simulate.n_prototypes)
    reference = matrix.subset_by_contests(split.train_ids + split.val_ids)

    rows = []
    summary: dict[str, object] = {
        "prototypes": protos,
        "n_boot": cfg.simulate.n_boot,
        "commission_rate": cfg.simulate.commission_rate,
    }
    for p_idx, cid in enumerate(protos):
        manifest = read_manifest(paths.contest_dir(cid))
        design = design_from_manifest(manifest)
        n_teams = int(manifest["counts.teams"])
        contest_m = matrix.subset_by_contests([cid])
        seed = child_seed(cfg.seed, _TAG_SIM, p_idx)
        for level in cfg.simulate.noise_levels:
            if level == "none":
                noise = sim.NoiseCorrection(level="none")
            elif level == "period":
                noise = sim.residual_distribution(bundle, reference, "period")
            else:
                noise = sim.residual_distribution(bundle, matrix, "contest", contest_id=cid)
            results = sim.enumerate_designs(
                bundle,
                contest_m,
                design,
                noise=noise,
                n_boot=cfg.simulate.n_boot,
                seed=seed,
                max_designs=cfg.simulate.max_designs,
            )
            for rank, r in enumerate(results, start=1):
                roi = sim.roi_estimate(
                    r, design, r.override, n_teams, cfg.simulate.commission_rate
                )
                rows.append(
                    (
                        cid,
                        level,
                        rank,
                        r.label,
                        r.ate,
                        r.ci_low,
                        r.ci_high,
                        r.mean_prediction,
                        roi.roi,
                        roi.ci_low,
                        roi.ci_high,
                        roi.prize_cost,
                        rank == 1,
                        rank == len(results),
                    )
                )
            best, worst = results[0], results[-1]
            summary[f"{cid}.{level}.best_design"] = best.label
            summary[f"{cid}.{level}.best_ate"] = best.ate
            summary[f"{cid}.{level}.worst_design"] = worst.label
            summary[f"{cid}.{level}.worst_ate"] = worst.ate
            if worst.ate != 0:
                summary[f"{cid}.{level}.best_vs_worst_pct"] = (
                    100.0 * (best.ate - worst.ate) / abs(worst.ate)
                )
    paths.sim_dir.mkdir(parents=True, exist_ok=True)
    dataio.write_table(paths.sim_results, SIM_HEADER, rows)
    dataio.write_kv(paths.sim_summary, summary)


# ---------------------------------------------------------------------------
# run orchestration
# ---------------------------------------------------------------------------


def _write_run_summary(paths: Paths) -> None:
    doc: dict[str, object] = {}
    files = sorted(
        p for p in paths.out.rglob("*") if p.is_file() and p != paths.run_summary
    )
    doc["n_artifacts"] = len(files)
    for p in files:
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        doc[f"artifact.{p.relative_to(paths.out).as_posix()}"] = digest
    dataio.write_kv(paths.run_summary, doc)


def run_stage(stage: str, cfg: RunConfig, out: Path, force: bool = False) -> None:
    paths = Paths(out=Path(out))
    paths.out.mkdir(parents=True, exist_ok=True)
    if stage == "generate":
        stage_generate(cfg, paths, force=force)
    elif stage == "estimate":
        stage_estimate(cfg, paths)
    elif stage == "featurize":
        stage_featurize(cfg, paths)
    elif stage == "train":
        stage_train(cfg, paths)
    elif stage == "evaluate":
        stage_evaluate(cfg, paths)
    elif stage == "simulate":
        stage_simulate(cfg, paths)
    else:
        raise ConfigError(f"unknown stage {stage!r}")


def run_pipeline(
    cfg: RunConfig, out: Path, force: bool = False, resume: bool = False
) -> None:
    """Run every stage in order and write the artifact digest summary."""
    paths = Paths(out=Path(out))
    paths.out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, paths.config)
    for stage in STAGES:
        marker = paths.stage_marker(stage)
        if resume and marker.exists():
            log.info("stage %s: output %s exists, skipping", stage, marker.name)
            continue
        run_stage(stage, cfg, paths.out, force=force)
        log.info("stage %s: done", stage)
    _write_run_summary(paths)
