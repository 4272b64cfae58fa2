"""Acceptance for the interactive component (criteria 10 and 11).

These run only once the browser-facing pieces exist; the primary
criteria (1-9) in test_acceptance.py are independent of them.
"""

import shutil
import subprocess
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from winnow.active import SessionConfig, run_session
from winnow.data import SyntheticSpec, generate_synthetic, save_dataset_csv, save_labels
from winnow.model import ModelConfig
from winnow.ranking import format_report
from winnow.service import create_app

import _verdicts

FRONTEND = Path(__file__).parent.parent / "frontend"

CANONICAL_SPEC = SyntheticSpec(n=2000, d=64, anomaly_fraction=0.01, seed=42)
SESSION_CFG = {"strategy": "hybrid", "iterations": 20, "budget": 10, "seed": 42}
MODEL_CFG = {"seed": 42}


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print("\n" + _verdicts.record(number, name, ok, detail))
    assert ok, f"criterion {number} failed: {detail}"


def test_criterion_10_oracle_parity(tmp_path):
    ds, labels = generate_synthetic(CANONICAL_SPEC)

    t0 = time.time()
    cli_session = run_session(
        ds,
        labels,
        SessionConfig(**SESSION_CFG),
        ModelConfig(input_dim=64, **MODEL_CFG),
    )
    cli_text = format_report(cli_session.report(dataset_name="canonical"))

    dataset_path = tmp_path / "dataset.csv"
    labels_path = tmp_path / "labels.csv"
    save_dataset_csv(ds, dataset_path)
    save_labels(labels, ds.ids, labels_path)

    app = create_app(state_dir=str(tmp_path / "state"))
    with TestClient(app) as client:
        info = client.post(
            "/datasets",
            json={
                "name": "canonical",
                "dataset_csv": dataset_path.read_text(),
                "labels_csv": labels_path.read_text(),
            },
        ).json()
        sid = client.post(
            "/sessions",
            json={"dataset_id": info["dataset_id"], "session": SESSION_CFG, "model": MODEL_CFG},
        ).json()["session_id"]

        deadline = time.time() + 540
        while time.time() < deadline:
            view = client.get(f"/sessions/{sid}").json()
            if view["phase"] == "complete":
                break
            if view["phase"] == "failed":
                raise AssertionError(f"service session failed: {view['error']}")
            if view["phase"] == "awaiting-labels":
                batch = client.get(f"/sessions/{sid}/candidates").json()["candidates"]
                answers = {c["id"]: labels[c["id"]] for c in batch}
                resp = client.post(f"/sessions/{sid}/labels", json={"labels": answers})
                assert resp.status_code == 200, resp.text
            else:
                time.sleep(0.05)
        handle = app.state.sessions[sid]
        handle.join(timeout=60)
        service_text = format_report(handle.session.report(dataset_name="canonical"))

    strip = lambda text: [l for l in text.splitlines() if not l.startswith("#")]
    same = strip(service_text) == strip(cli_text)
    verdict(
        10,
        "oracle parity",
        same,
        f"scripted API client reproduces the simulated-oracle report "
        f"byte-for-byte on the canonical dataset ({time.time() - t0:.0f}s)",
    )


def test_criterion_11_ui_contract():
    if shutil.which("npm") is None or not (FRONTEND / "node_modules").is_dir():
        pytest.skip("frontend toolchain not installed (run npm install in frontend/)")
    static = Path(__file__).parent.parent / "src" / "winnow" / "static"
    assert (static / "index.html").exists(), "built UI assets missing; run npm run build"
    proc = subprocess.run(
        ["npm", "run", "e2e", "--silent"],
        cwd=FRONTEND,
        capture_output=True,
        text=True,
        timeout=300,
    )
    ok = proc.returncode == 0
    tail = "\n".join((proc.stdout + proc.stderr).splitlines()[-6:])
    verdict(
        11,
        "UI contract",
        ok,
        "dashboard end-to-end test against a live fixture session passed"
        if ok
        else f"e2e failed:\n{tail}",
    )
