"""Read-only HTTP API over a finished run directory.

Plain-text attribute-value responses, shared with the CLI formatters:

    GET  /contests        contest index with split membership
    GET  /contests/<id>   one contest's design, counts, and estimated ATET
    GET  /model           the final model card
    POST /simulate        one what-if simulation (kv request body)

The server never mutates the run directory; every request is answered from
state loaded at startup plus bounded per-request compute. Requests whose
bootstrap work would exceed the configured budget are refused with 429.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping

from . import dataio, reports, simulate as sim
from .config import RunConfig, load_config
from .errors import BudgetError, ConfigError
from .features import FeatureMatrix, read_matrix
from .models.bundle import ModelBundle, load_bundle
from .pipeline import Paths, read_contest_index, read_split
from .synthgen import ContestDesign, design_from_manifest, read_manifest

log = logging.getLogger(__name__)

__all__ = ["ApiState", "WhatifRequest", "load_state", "parse_whatif", "run_whatif", "make_server", "serve"]

WHATIF_KEYS = frozenset(
    {
        "contest_id",
        "captain_bonus",
        "reward_fifth",
        "include_worst",
        "group_size",
        "fifth_prize_frac",
        "prize_schedule",
        "noise_level",
        "n_boot",
        "seed",
    }
)


@dataclass
class ApiState:
    cfg: RunConfig
    paths: Paths
    index: list[dict[str, str]]
    bucket_of: dict[str, str]
    atet_by_contest: dict[str, dict[str, str]]
    manifests: dict[str, dict[str, str]]
    designs: dict[str, ContestDesign]
    bundle: ModelBundle
    matrix: FeatureMatrix
    reference: FeatureMatrix
    eval_summary: dict[str, str]

    def contest_row(self, contest_id: str) -> dict[str, str] | None:
        for row in self.index:
            if row["contest_id"] == contest_id:
                return row
        return None


def load_state(out: Path | str, cfg: RunConfig | None = None) -> ApiState:
    """Load everything the API serves; fails fast if the run is incomplete."""
    paths = Paths(out=Path(out))
    if cfg is None:
        cfg = load_config(paths.config) if paths.config.exists() else RunConfig()
    index = read_contest_index(paths)
    split = read_split(paths)
    bucket_of: dict[str, str] = {}
    for name, ids in (("train", split.train_ids), ("val", split.val_ids), ("test", split.test_ids)):
        for cid in ids:
            bucket_of[cid] = name
    atet_by_contest: dict[str, dict[str, str]] = {}
    if paths.atet_table.exists():
        header, rows = dataio.read_table(paths.atet_table)
        for row in rows:
            rec = dict(zip(header, row))
            atet_by_contest[rec["contest_id"]] = rec
    manifests = {
        row["contest_id"]: read_manifest(paths.contest_dir(row["contest_id"])) for row in index
    }
    designs = {cid: design_from_manifest(m) for cid, m in manifests.items()}
    bundle = load_bundle(paths.final_model)
    matrix = read_matrix(paths.matrix)
    reference = matrix.subset_by_contests(split.train_ids + split.val_ids)
    eval_summary = dataio.read_kv(paths.eval_summary) if paths.eval_summary.exists() else {}
    return ApiState(
        cfg=cfg,
        paths=paths,
        index=index,
        bucket_of=bucket_of,
        atet_by_contest=atet_by_contest,
        manifests=manifests,
        designs=designs,
        bundle=bundle,
        matrix=matrix,
        reference=reference,
        eval_summary=eval_summary,
    )


# ---------------------------------------------------------------------------
# What-if requests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WhatifRequest:
    contest_id: str
    override: sim.DesignOverride
    noise_level: str
    n_boot: int
    seed: int


def _tri_state(key: str, text: str) -> bool | None:
    low = text.strip().lower()
    if low in ("keep", ""):
        return None
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"{key} must be one of keep/on/off, got {text!r}")


def parse_whatif(raw: Mapping[str, str], default_n_boot: int) -> WhatifRequest:
    unknown = set(raw) - WHATIF_KEYS
    if unknown:
        raise ValueError(f"unknown request keys: {sorted(unknown)}")
    if "contest_id" not in raw or not raw["contest_id"]:
        raise ValueError("contest_id is required")
    group_size = None
    if raw.get("group_size", "") != "":
        group_size = int(raw["group_size"])
    kwargs = {}
    if raw.get("fifth_prize_frac", "") != "":
        kwargs["fifth_prize_frac"] = float(raw["fifth_prize_frac"])
    if raw.get("prize_schedule", "") != "":
        parts = raw["prize_schedule"].replace("/", ",").split(",")
        kwargs["prize_schedule"] = tuple(float(p) for p in parts)
    override = sim.DesignOverride(
        captain_bonus=_tri_state("captain_bonus", raw.get("captain_bonus", "keep")),
        reward_fifth=_tri_state("reward_fifth", raw.get("reward_fifth", "keep")),
        include_worst=_tri_state("include_worst", raw.get("include_worst", "keep")),
        group_size=group_size,
        **kwargs,
    )
    noise_level = raw.get("noise_level", "none")
    if noise_level not in sim.NOISE_LEVELS:
        raise ValueError(f"noise_level must be one of {'/'.join(sim.NOISE_LEVELS)}")
    n_boot = int(raw.get("n_boot", str(default_n_boot)))
    if n_boot < 1:
        raise ValueError("n_boot must be positive")
    return WhatifRequest(
        contest_id=raw["contest_id"],
        override=override,
        noise_level=noise_level,
        n_boot=n_boot,
        seed=int(raw.get("seed", "0")),
    )


def run_whatif(state: ApiState, req: WhatifRequest) -> dict[str, object]:
    """Simulate one design variant for one contest; raises on bad input."""
    if req.contest_id not in state.designs:
        raise KeyError(req.contest_id)
    contest_m = state.matrix.subset_by_contests([req.contest_id])
    if contest_m.n_rows == 0:
        raise ValueError(f"contest {req.contest_id} has no feature rows")
    cells = req.n_boot * contest_m.n_rows
    if cells > state.cfg.serve.max_sim_cells:
        raise BudgetError(
            f"request needs {cells} bootstrap cells, budget is {state.cfg.serve.max_sim_cells}"
        )
    if req.noise_level == "none":
        noise = sim.NoiseCorrection(level="none")
    elif req.noise_level == "period":
        noise = sim.residual_distribution(state.bundle, state.reference, "period")
    else:
        noise = sim.residual_distribution(
            state.bundle, state.matrix, "contest", contest_id=req.contest_id
        )
    design = state.designs[req.contest_id]
    result = sim.simulate_ate(
        state.bundle, contest_m, design, req.override, noise, n_boot=req.n_boot, seed=req.seed
    )
    n_teams = int(state.manifests[req.contest_id]["counts.teams"])
    roi = sim.roi_estimate(
        result, design, req.override, n_teams, state.cfg.simulate.commission_rate
    )
    return reports.simulation_report(result, roi)


# ---------------------------------------------------------------------------
# HTTP plumbing
# ---------------------------------------------------------------------------


def _kv_bytes(doc: Mapping[str, object]) -> bytes:
    return dataio.render_kv(doc).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    state: ApiState  # set by make_server on the handler class

    def _send(self, status: int, doc: Mapping[str, object]) -> None:
        body = _kv_bytes(doc)
        self.send_response(status)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        # Browser clients load the studio page from a different origin than
        # the API; the service is read-only and unauthenticated, so a blanket
        # allow is safe.
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def do_GET(self) -> None:  # noqa: N802 (stdlib handler contract)
        state = self.state
        path = self.path.rstrip("/") or "/"
        if path == "/contests":
            self._send(200, reports.contests_overview(state.index, state.bucket_of))
            return
        if path.startswith("/contests/"):
            contest_id = path[len("/contests/") :]
            row = state.contest_row(contest_id)
            if row is None:
                self._send(404, {"error": f"unknown contest {contest_id!r}"})
                return
            self._send(
                200,
                reports.contest_detail(
                    row,
                    state.manifests[contest_id],
                    state.atet_by_contest.get(contest_id),
                    state.bucket_of.get(contest_id, "excluded"),
                ),
            )
            return
        if path == "/model":
            self._send(200, reports.model_info(state.bundle, state.eval_summary))
            return
        self._send(404, {"error": f"unknown path {self.path!r}"})

    def do_POST(self) -> None:  # noqa: N802
        if self.path.rstrip("/") != "/simulate":
            self._send(404, {"error": f"unknown path {self.path!r}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw_body = self.rfile.read(length).decode("utf-8")
            raw = dataio.parse_kv(raw_body)
            req = parse_whatif(raw, self.state.cfg.simulate.n_boot)
        except (ValueError, ConfigError, UnicodeDecodeError) as exc:
            self._send(400, {"error": str(exc)})
            return
        try:
            doc = run_whatif(self.state, req)
        except KeyError as exc:
            self._send(404, {"error": f"unknown contest {exc.args[0]!r}"})
            return
        except BudgetError as exc:
            self._send(429, {"error": str(exc)})
            return
        except ValueError as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, doc)


def make_server(out: Path | str, host: str, port: int, cfg: RunConfig | None = None) -> ThreadingHTTPServer:
    """Build a ready-to-run server; callers own serve_forever/shutdown."""
    state = load_state(out, cfg)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve(out: Path | str, address: str, cfg: RunConfig | None = None) -> None:
    host, _, port_text = address.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"address must look like host:port, got {address!r}")
    server = make_server(out, host, int(port_text), cfg)
    log.info("serving on http://%s:%s", host, port_text)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
