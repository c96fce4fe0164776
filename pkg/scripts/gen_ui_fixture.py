#!/usr/bin/env python3
"""Capture a scripted 16-round service session as a frontend test fixture.

The vitest suite replays these captured responses against the client store
to check transcript parity and information hygiene without a live server.
Deterministic: fixed seed, scripted choices, session id normalized.
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from qkdsim.service import create_app

FIXTURE = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures" / "session16.json"

N_BITS = 16
SEED = 20240
SAMPLE_LEN = 2


def scripted_choices():
    for i in range(N_BITS):
        alice = {"role": "alice", "bit": (i * 7 + 1) % 2, "basis": "HV" if (i % 4) < 2 else "DAD"}
        bob = {"role": "bob", "basis": "HV" if (i % 3) != 1 else "DAD"}
        yield alice, bob


def build_fixture() -> dict:
    client = TestClient(create_app())
    created = client.post(
        "/api/v1/sessions",
        json={"n_bits": N_BITS, "sample_len": SAMPLE_LEN, "noise_sigma_volts": 0.0, "seed": SEED},
    ).json()
    sid = created["session_id"]

    choices = []
    for alice, bob in scripted_choices():
        client.post(f"/api/v1/sessions/{sid}/choice", json=alice)
        client.post(f"/api/v1/sessions/{sid}/choice", json=bob)
        client.post(f"/api/v1/sessions/{sid}/step", json={"rounds": 1})
        choices.append({"alice": alice, "bob": bob})

    def log(role):
        return client.get(f"/api/v1/sessions/{sid}/log", params={"role": role}).json()["events"]

    bob_events_precompare = log("bob")
    bob_view_precompare = client.get(
        f"/api/v1/sessions/{sid}/view", params={"role": "bob"}
    ).json()

    verdict = client.post(f"/api/v1/sessions/{sid}/compare", json={}).json()
    report = client.get(f"/api/v1/sessions/{sid}/report").json()
    instructor_events = log("instructor")
    instructor_view = client.get(
        f"/api/v1/sessions/{sid}/view", params={"role": "instructor"}
    ).json()

    fixture = {
        "config": {"n_bits": N_BITS, "sample_len": SAMPLE_LEN, "seed": SEED},
        "create": created,
        "choices": choices,
        "bob_events_precompare": bob_events_precompare,
        "bob_view_precompare": bob_view_precompare,
        "instructor_events": instructor_events,
        "instructor_view": instructor_view,
        "verdict": verdict,
        "report": report,
    }
    text = json.dumps(fixture, indent=2)
    return json.loads(text.replace(sid, "fixture-session"))


def main():
    FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE.write_text(json.dumps(build_fixture(), indent=2) + "\n")
    print(f"wrote {FIXTURE}")


if __name__ == "__main__":
    main()
