"""Record wire fixtures for the studio tests from a live service run.

Builds a small deterministic pipeline run, starts the HTTP service on a
loopback port, replays every interaction the browser tests assert on, and
writes the raw response bodies verbatim into fixtures/studio_fixtures.json.
The design ranking is computed directly with the simulation library on the
same artifacts, so the pinboard-ordering test compares the rendered board
against the service's own enumeration.

Run from the frontend directory (service package must be installed):

    python3 scripts/record_fixtures.py
"""
from __future__ import annotations

import dataclasses
import json
import tempfile
import threading
import urllib.error
import urllib.request
from pathlib import Path

from teamlift import dataio, server
from teamlift import simulate as sim
from teamlift.config import RunConfig
from teamlift.pipeline import run_pipeline

FIXTURE_PATH = Path(__file__).resolve().parent.parent / "fixtures" / "studio_fixtures.json"

N_BOOT = "120"
SEED = "7"


def studio_config() -> RunConfig:
    """Small but with several training contests, so the model actually sees
    design variation and simulated variants separate instead of tying."""
    cfg = RunConfig(seed=11)
    return dataclasses.replace(
        cfg,
        generate=dataclasses.replace(
            cfg.generate,
            n_cities=2,
            drivers_per_city=220,
            signups_per_contest=70,
            train_contests_per_city=2,
            val_contests_per_city=1,
            test_contests_per_city=1,
        ),
        train=dataclasses.replace(
            cfg.train,
            lasso_n_lambdas=4,
            gbrt_n_trees=(30,),
            gbrt_max_depth=(2,),
            gbrt_learning_rate=(0.1,),
            gbrt_subsample=(0.8,),
        ),
        simulate=dataclasses.replace(cfg.simulate, n_prototypes=1, n_boot=50),
        evaluate=dataclasses.replace(cfg.evaluate, permutation_rounds=200),
    )


def canonical(method: str, path: str, request: dict[str, str] | None = None) -> str:
    """Lookup key shared with the TypeScript fetch mock."""
    if request is None:
        return f"{method} {path}"
    joined = "&".join(f"{k}={v}" for k, v in sorted(request.items()))
    return f"{method} {path} {joined}"


def http_get(base: str, path: str) -> tuple[int, str]:
    try:
        with urllib.request.urlopen(base + path) as resp:
            return resp.status, resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8")


def http_post(base: str, path: str, request: dict[str, str]) -> tuple[int, str]:
    body = dataio.render_kv(request).encode("utf-8")
    req = urllib.request.Request(base + path, data=body, method="POST")
    req.add_header("Content-Type", "text/plain; charset=utf-8")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8")


def main() -> None:
    out = Path(tempfile.mkdtemp(prefix="studio_fixture_run_"))
    print(f"building fixture run in {out}")
    cfg = studio_config()
    run_pipeline(cfg, out)

    srv = server.make_server(out, "127.0.0.1", 0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    host, port = srv.server_address[:2]
    base = f"http://{host}:{port}"
    print(f"service on {base}")

    state = server.load_state(out)
    contest_ids = [row["contest_id"] for row in state.index]
    cid = contest_ids[0]
    print(f"contests: {contest_ids}; driving {cid}")

    api: dict[str, dict[str, object]] = {}

    def record(key: str, status: int, body: str) -> None:
        if key in api:
            assert api[key] == {"status": status, "body": body}, f"unstable: {key}"
        api[key] = {"status": status, "body": body}

    # Listing, details, model card, and an unknown contest id.
    for path in ["/contests", "/model", "/contests/ghost"] + [
        f"/contests/{c}" for c in contest_ids
    ]:
        status, body = http_get(base, path)
        record(canonical("GET", path), status, body)

    identity = {
        "contest_id": cid,
        "captain_bonus": "keep",
        "reward_fifth": "keep",
        "include_worst": "keep",
        "group_size": "",
        "prize_schedule": "",
        "noise_level": "none",
        "n_boot": N_BOOT,
        "seed": SEED,
    }

    interactions = [
        {"name": "identity", "request": dict(identity)},
        {"name": "captain bonus on", "request": {**identity, "captain_bonus": "on"}},
        {"name": "captain bonus off", "request": {**identity, "captain_bonus": "off"}},
        {"name": "reward fifth on", "request": {**identity, "reward_fifth": "on"}},
        {"name": "include worst on", "request": {**identity, "include_worst": "on"}},
        {"name": "groups of 7", "request": {**identity, "group_size": "7"}},
        {
            "name": "flatter prizes",
            "request": {**identity, "prize_schedule": "900/500/300/200/100"},
        },
        {
            "name": "period noise",
            "request": {**identity, "noise_level": "period", "n_boot": "80"},
        },
        {
            "name": "contest noise seed 3",
            "request": {**identity, "noise_level": "contest", "seed": "3"},
        },
        {"name": "identity again", "request": dict(identity)},
    ]
    for item in interactions:
        status, body = http_post(base, "/simulate", item["request"])
        assert status == 200, (item["name"], status, body)
        record(canonical("POST", "/simulate", item["request"]), status, body)

    cube = []
    for cb in ("off", "on"):
        for rf in ("off", "on"):
            for iw in ("off", "on"):
                request = {
                    **identity,
                    "captain_bonus": cb,
                    "reward_fifth": rf,
                    "include_worst": iw,
                }
                cube.append({"request": request})
                status, body = http_post(base, "/simulate", request)
                assert status == 200, (request, status, body)
                record(canonical("POST", "/simulate", request), status, body)

    errors = {
        "budget": {**identity, "n_boot": "999999"},
        "bad_group_size": {**identity, "group_size": "x"},
        "ghost_contest": {**identity, "contest_id": "ghost"},
    }
    for name, request in errors.items():
        status, body = http_post(base, "/simulate", request)
        assert status != 200, (name, status)
        record(canonical("POST", "/simulate", request), status, body)

    srv.shutdown()
    srv.server_close()
    thread.join(timeout=5)

    # The service's own ranking of the full on/off cube, computed on the same
    # artifacts with the same bootstrap settings as the recorded cube posts.
    contest_m = state.matrix.subset_by_contests([cid])
    ranked = sim.enumerate_designs(
        state.bundle,
        contest_m,
        state.designs[cid],
        noise=sim.NoiseCorrection(level="none"),
        n_boot=int(N_BOOT),
        seed=int(SEED),
    )
    expected_order = [
        {"label": r.label, "ate": dataio.format_value(r.ate)} for r in ranked
    ]

    # Internal consistency: every cube response must carry exactly the ATE the
    # direct enumeration produced for its design label.
    by_label = {e["label"]: e["ate"] for e in expected_order}
    assert len(by_label) == 8
    for item in cube:
        doc = dataio.parse_kv(api[canonical("POST", "/simulate", item["request"])]["body"])  # type: ignore[arg-type]
        assert doc["ate"] == by_label[doc["design"]], doc["design"]

    fixtures = {
        "base_config_seed": cfg.seed,
        "contest_id": cid,
        "contest_ids": contest_ids,
        "n_boot": N_BOOT,
        "seed": SEED,
        "api": api,
        "interactions": interactions,
        "cube": cube,
        "errors": errors,
        "expected_order": expected_order,
    }
    FIXTURE_PATH.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE_PATH.write_text(json.dumps(fixtures, indent=1, sort_keys=True) + "\n")
    print(f"wrote {FIXTURE_PATH} ({len(api)} recorded responses)")


if __name__ == "__main__":
    main()
