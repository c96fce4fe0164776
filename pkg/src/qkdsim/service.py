"""Demo-UI service: interactive sessions over REST plus a server-sent event
stream, backing the classroom consoles (Alice, Bob, Instructor).

Hidden information is enforced server-side: a role only ever receives the
fields it is allowed to see, so Alice's bits cannot appear in Bob's console
state before the compare phase, and Eve's activity is instructor-only until
revealed. All protocol logic lives here; the browser client is a thin view.

Every session keeps an append-only event log with monotonically increasing
ids; the SSE stream replays from any cursor (Last-Event-ID), which is also
how a reconnecting client recovers.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import secrets
import threading
import uuid
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .adversary import Eavesdropper, EveConfig
from .engine import (
    ABORTED,
    KEY_ESTABLISHED,
    KeyTooShort,
    _build_transcript,
    bits_to_string,
    extract_key,
    otp_encrypt,
    run_slot,
    sift,
)
from .optics import PipelineConfig, Trace
from .polarization import DEFAULT_TABLE, Basis, Trit
from .report import FORMAT as REPORT_FORMAT
from .trace_codec import DecoderConfig, export_trace_csv, trits_to_string

ROLES = ("alice", "bob", "instructor")
BASIS_NAMES = ("HV", "DAD")


class CreateSessionBody(BaseModel):
    n_bits: int = Field(16, ge=1, le=4096)
    sample_len: int = Field(0, ge=0)
    abort_mismatch_threshold: float = Field(0.0, ge=0.0, le=1.0)
    noise_sigma_volts: float = Field(0.02, ge=0.0)
    drift_offset_deg: float = 0.0
    photons_per_pulse: int | None = Field(None, ge=1)
    seed: int | None = Field(None, ge=0)


class ChoiceBody(BaseModel):
    role: Literal["alice", "bob"]
    bit: int | None = Field(None, ge=0, le=1)
    basis: Literal["HV", "DAD", "auto"] | None = None


class StepBody(BaseModel):
    rounds: int = Field(1, ge=1, le=4096)


class EveBody(BaseModel):
    enabled: bool
    tap_fraction: float = Field(1.0, ge=0.0, le=1.0)
    mode: Literal["beam", "photon"] = "beam"
    photon_count: int = Field(1, ge=1)
    seed: int | None = Field(None, ge=0)


class ChannelBody(BaseModel):
    noise_sigma_volts: float | None = Field(None, ge=0.0)
    drift_offset_deg: float | None = None


class CompareBody(BaseModel):
    sample_len: int | None = Field(None, ge=0)


class OtpBody(BaseModel):
    plaintext: str | None = None
    ciphertext_hex: str | None = None


class InteractiveSession:
    """One stepwise protocol run; all mutations happen under the lock."""

    def __init__(self, session_id: str, body: CreateSessionBody):
        self.id = session_id
        self.lock = threading.Lock()
        self.n_bits = body.n_bits
        self.sample_len = body.sample_len
        self.threshold = body.abort_mismatch_threshold
        self.seed = body.seed if body.seed is not None else secrets.randbits(32)
        self.pipeline = PipelineConfig(
            noise_sigma_volts=body.noise_sigma_volts,
            drift_offset_deg=body.drift_offset_deg,
            photons_per_pulse=body.photons_per_pulse,
            seed=self.seed,
        )
        self.decoder = DecoderConfig.for_pipeline(self.pipeline)
        seq = np.random.SeedSequence(self.seed)
        alice_ss, bob_ss, channel_ss = seq.spawn(3)
        self._alice_rng = np.random.default_rng(alice_ss)
        self._bob_rng = np.random.default_rng(bob_ss)
        self._channel_rng = np.random.default_rng(channel_ss)
        self.eve: Eavesdropper | None = None
        self.eve_config: EveConfig | None = None
        self.rows: list[dict] = []
        self.staged: dict = {"alice": None, "bob": None}
        self.state = "running"  # running | compared | aborted
        self.revealed = False
        self.verdict: dict | None = None
        self.traces: list[Trace] = []
        self._events: list[dict] = []
        self._next_event = 1
        self._emit("session_created", public={"n_bits": self.n_bits, "seed": self.seed})

    # -- events ------------------------------------------------------------

    def _emit(self, etype: str, public: dict | None = None, **role_extras) -> None:
        entry = {"id": self._next_event, "type": etype, "public": public}
        entry.update({r: v for r, v in role_extras.items() if v is not None})
        self._next_event += 1
        self._events.append(entry)

    def events_for(self, role: str, after: int = 0) -> list[dict]:
        out = []
        for e in self._events:
            if e["id"] <= after:
                continue
            payload = dict(e["public"] or {})
            if self.revealed:
                for r in ROLES:
                    payload.update(e.get(r) or {})
            else:
                payload.update(e.get(role) or {})
            if not payload and e["public"] is None:
                continue  # instructor-only event, invisible to this role
            out.append({"id": e["id"], "type": e["type"], "data": payload})
        return out

    # -- rounds ------------------------------------------------------------

    @property
    def current_round(self) -> int:
        return len(self.rows)

    def stage_choice(self, body: ChoiceBody) -> dict:
        if self.state != "running":
            raise HTTPException(409, {"error": "session is not accepting rounds"})
        if self.current_round >= self.n_bits:
            raise HTTPException(409, {"error": "all rounds already completed"})
        staged = {"basis": body.basis}
        if body.role == "alice":
            staged["bit"] = body.bit
        self.staged[body.role] = staged
        self._emit(
            "choice_staged",
            public={"round": self.current_round, "role": body.role},
        )
        return {"round": self.current_round, "staged": self.staged_status()}

    def staged_status(self) -> dict:
        return {r: self.staged[r] is not None for r in ("alice", "bob")}

    def _resolve_basis(self, value, rng) -> Basis:
        if value in (None, "auto"):
            return Basis(int(rng.integers(0, 2)))
        return Basis[value]

    def step(self, rounds: int = 1) -> list[dict]:
        if self.state != "running":
            raise HTTPException(409, {"error": "session is not accepting rounds"})
        done = []
        for _ in range(rounds):
            if self.current_round >= self.n_bits:
                break
            done.append(self._run_round())
        return done

    def _run_round(self) -> dict:
        i = self.current_round
        alice = self.staged["alice"] or {}
        bob = self.staged["bob"] or {}
        self.staged = {"alice": None, "bob": None}
        bit = alice.get("bit")
        if bit is None:
            bit = int(self._alice_rng.integers(0, 2))
        abasis = self._resolve_basis(alice.get("basis"), self._alice_rng)
        bbasis = self._resolve_basis(bob.get("basis"), self._bob_rng)
        result = run_slot(
            i, bit, abasis, bbasis,
            eve=self.eve,
            pipeline=self.pipeline,
            decoder=self.decoder,
            rng=self._channel_rng,
        )
        eve_row = None
        if self.eve is not None and self.eve.transcript:
            last = self.eve.transcript[-1]
            eve_row = {
                "tapped": last.tapped,
                "basis": last.basis.name if last.basis is not None else None,
                "bit": last.bit,
            }
        row = {
            "round": i,
            "alice_bit": bit,
            "alice_basis": BASIS_NAMES[abasis],
            "state": result.state_name,
            "bob_basis": BASIS_NAMES[bbasis],
            "ch1_v": round(result.mean_ch1_v, 6),
            "ch2_v": round(result.mean_ch2_v, 6),
            "trit": result.trit.char,
            "kept": None,
            "key_bit": None,
            "eve": eve_row,
        }
        self.rows.append(row)
        self.traces.append(result.trace)
        self._emit(
            "round_completed",
            public={"round": i},
            alice={"alice_bit": bit, "alice_basis": row["alice_basis"], "state": row["state"]},
            bob={
                "bob_basis": row["bob_basis"],
                "ch1_v": row["ch1_v"],
                "ch2_v": row["ch2_v"],
                "trit": row["trit"],
            },
            instructor={**{k: v for k, v in row.items() if k != "round"}},
        )
        return row

    # -- eve ---------------------------------------------------------------

    def set_eve(self, body: EveBody) -> dict:
        if self.state != "running":
            raise HTTPException(409, {"error": "session is no longer running"})
        if body.enabled:
            cfg = EveConfig(
                tap_fraction=body.tap_fraction,
                seed_eve=body.seed if body.seed is not None else secrets.randbits(32),
                mode=body.mode,
                photon_count=body.photon_count,
            )
            self.eve_config = cfg
            self.eve = Eavesdropper(cfg)
        else:
            self.eve = None
            self.eve_config = None
        status = self.eve_status(full=True)
        self._emit("eve_changed", public=None, instructor=status)
        return status

    def eve_status(self, full: bool) -> dict:
        if self.eve_config is None:
            return {"enabled": False}
        status = {
            "enabled": True,
            "tap_fraction": self.eve_config.tap_fraction,
            "mode": self.eve_config.mode,
            "photon_count": self.eve_config.photon_count,
        }
        if full:
            status["seed"] = int(self.eve_config.seed_eve)
        return status

    def set_channel(self, body: ChannelBody) -> dict:
        """Turn the physical knobs (noise, fiber drift) between rounds."""
        if self.state != "running":
            raise HTTPException(409, {"error": "session is no longer running"})
        updates = {}
        if body.noise_sigma_volts is not None:
            updates["noise_sigma_volts"] = body.noise_sigma_volts
        if body.drift_offset_deg is not None:
            updates["drift_offset_deg"] = body.drift_offset_deg
        if updates:
            self.pipeline = dataclasses.replace(self.pipeline, **updates)
            self.decoder = DecoderConfig.for_pipeline(self.pipeline)
        status = {
            "noise_sigma_volts": self.pipeline.noise_sigma_volts,
            "drift_offset_deg": self.pipeline.drift_offset_deg,
        }
        self._emit("channel_changed", public=None, instructor=status)
        return status

    def reveal(self) -> dict:
        """Classroom reveal: every role sees the full table from here on."""
        self.revealed = True
        self._emit("revealed", public={"revealed": True})
        return {"revealed": True}

    # -- compare / verdict ---------------------------------------------------

    def compare(self, sample_len: int | None) -> dict:
        if self.state == "aborted":
            raise HTTPException(409, {"error": "session was aborted"})
        if self.current_round < self.n_bits:
            raise HTTPException(
                409,
                {"error": f"only {self.current_round} of {self.n_bits} rounds completed"},
            )
        if self.state == "compared":
            return self.verdict
        k = self.sample_len if sample_len is None else sample_len
        abits = np.array([r["alice_bit"] for r in self.rows], dtype=np.uint8)
        abases = np.array([BASIS_NAMES.index(r["alice_basis"]) for r in self.rows], dtype=np.uint8)
        bbases = np.array([BASIS_NAMES.index(r["bob_basis"]) for r in self.rows], dtype=np.uint8)
        trits = np.array([Trit.from_char(r["trit"]).value for r in self.rows], dtype=np.int8)
        midx = sift(abases, bbases)
        alice_key = extract_key(abits, midx).astype(np.int8)
        bob_key = extract_key(trits, midx)
        if k > 0 and len(midx) <= k:
            raise HTTPException(
                409, {"error": f"sifted length {len(midx)} must exceed sample_len {k}"}
            )
        if k > 0:
            mismatches = int((alice_key[:k] != bob_key[:k]).sum())
            rate = mismatches / k
        else:
            mismatches, rate = 0, 0.0
        established = rate <= self.threshold
        final_alice = alice_key[k:] if established else alice_key[:0]
        final_bob = bob_key[k:] if established else bob_key[:0]
        self._final_key = final_alice.astype(np.uint8)
        self._sift_arrays = (abits, abases, bbases, trits, midx, k)
        kept = set(int(i) for i in midx)
        final_by_slot = {int(s): int(b) for s, b in zip(midx[k:], final_alice)}
        for r in self.rows:
            r["kept"] = r["round"] in kept
            r["key_bit"] = final_by_slot.get(r["round"])
        self.state = "compared"
        self.revealed = True
        self.verdict = {
            "verdict": KEY_ESTABLISHED if established else ABORTED,
            "sifted_len": int(len(midx)),
            "matching_indices": [int(i) for i in midx],
            "sample_len": k,
            "mismatches": mismatches,
            "mismatch_rate": rate,
            "alice_key": bits_to_string(alice_key),
            "bob_key": trits_to_string(bob_key),
            "final_key": bits_to_string(final_alice),
            "final_bob_key": trits_to_string(final_bob),
        }
        self._emit("compared", public={**self.verdict, "rows": self.row_views("instructor")})
        return self.verdict

    def abort(self) -> dict:
        if self.state == "compared":
            raise HTTPException(409, {"error": "session already compared"})
        self.state = "aborted"
        self.verdict = {"verdict": ABORTED, "reason_code": 3}
        self._emit("aborted", public={"reason_code": 3})
        return self.verdict

    def otp(self, body: OtpBody) -> dict:
        if self.state != "compared" or self.verdict["verdict"] != KEY_ESTABLISHED:
            raise HTTPException(409, {"error": "no established key to encrypt with"})
        if (body.plaintext is None) == (body.ciphertext_hex is None):
            raise HTTPException(400, {"error": "provide exactly one of plaintext, ciphertext_hex"})
        try:
            if body.plaintext is not None:
                cipher = otp_encrypt(body.plaintext.encode("utf-8"), self._final_key)
                return {"ciphertext_hex": cipher.hex(), "key_bits_used": 8 * len(cipher)}
            clear = otp_encrypt(bytes.fromhex(body.ciphertext_hex), self._final_key)
            return {"plaintext": clear.decode("utf-8", errors="replace"),
                    "key_bits_used": 8 * len(clear)}
        except KeyTooShort as exc:
            raise HTTPException(400, {"error": str(exc)}) from None

    # -- views ---------------------------------------------------------------

    def row_views(self, role: str) -> list[dict]:
        out = []
        for r in self.rows:
            if self.revealed or role == "instructor":
                row = {k: v for k, v in r.items()}
            elif role == "alice":
                row = {k: r[k] for k in ("round", "alice_bit", "alice_basis", "state", "kept", "key_bit")}
            else:
                row = {k: r[k] for k in ("round", "bob_basis", "ch1_v", "ch2_v", "trit", "kept", "key_bit")}
            out.append(row)
        return out

    def phase(self) -> str:
        if self.state == "aborted":
            return "aborted"
        if self.state == "compared":
            return "done"
        if self.current_round >= self.n_bits:
            return "comparing"
        return "encoding"

    def view(self, role: str) -> dict:
        show_eve = role == "instructor" or self.revealed
        return {
            "session_id": self.id,
            "role": role,
            "n_bits": self.n_bits,
            "sample_len": self.sample_len,
            "seed": self.seed,
            "phase": self.phase(),
            "current_round": self.current_round,
            "staged": self.staged_status(),
            "rows": self.row_views(role),
            "eve": self.eve_status(full=role == "instructor") if show_eve else None,
            "verdict": self.verdict,
            "revealed": self.revealed,
        }

    def report(self) -> dict:
        if self.state != "compared":
            raise HTTPException(409, {"error": "report is available after the compare phase"})
        abits, abases, bbases, trits, midx, k = self._sift_arrays
        final_indices = midx[k:] if self.verdict["verdict"] == KEY_ESTABLISHED else midx[:0]
        transcript = _build_transcript(
            abits, abases, bbases, trits, midx, k, final_indices, self._final_key, DEFAULT_TABLE
        )
        return {
            "format": REPORT_FORMAT,
            "session": {
                "n_bits": self.n_bits,
                "sample_len": k,
                "abort_mismatch_threshold": self.threshold,
                "seed": self.seed,
            },
            "pipeline": {
                "noise_sigma_volts": self.pipeline.noise_sigma_volts,
                "drift_offset_deg": self.pipeline.drift_offset_deg,
                "photons_per_pulse": self.pipeline.photons_per_pulse,
                "seed": self.seed,
            },
            "outcome": {
                "verdict": self.verdict["verdict"],
                "final_key": self.verdict["final_key"],
                "final_key_len": len(self.verdict["final_key"]),
                "sifted_len": self.verdict["sifted_len"],
                "sample_len": k,
                "sample_mismatch_rate": self.verdict["mismatch_rate"],
            },
            "trits": trits_to_string(trits),
            "matching_indices": self.verdict["matching_indices"],
            "rows": transcript.as_dicts(),
            "events": transcript.events,
            "eve_transcript": self.eve.transcript_dicts() if self.eve else None,
        }

    def trace_csv(self) -> bytes:
        if not self.traces:
            return export_trace_csv(Trace(self.pipeline.sample_period_ns, [], []))
        ch1 = np.concatenate([t.ch1_volts for t in self.traces])
        ch2 = np.concatenate([t.ch2_volts for t in self.traces])
        return export_trace_csv(Trace(self.pipeline.sample_period_ns, ch1, ch2))


def create_app(static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="qkdsim demo service", version="1")
    sessions: dict[str, InteractiveSession] = {}
    app.state.sessions = sessions

    def get_session(session_id: str) -> InteractiveSession:
        try:
            return sessions[session_id]
        except KeyError:
            raise HTTPException(404, {"error": f"no session {session_id}"}) from None

    def check_role(role: str) -> str:
        if role not in ROLES:
            raise HTTPException(400, {"error": f"role must be one of {ROLES}"})
        return role

    @app.post("/api/v1/sessions")
    def create_session(body: CreateSessionBody):
        session_id = uuid.uuid4().hex[:12]
        session = InteractiveSession(session_id, body)
        sessions[session_id] = session
        return {"session_id": session_id, "seed": session.seed, "n_bits": session.n_bits}

    @app.get("/api/v1/sessions/{session_id}/view")
    def get_view(session_id: str, role: str = "instructor"):
        session = get_session(session_id)
        with session.lock:
            return session.view(check_role(role))

    @app.post("/api/v1/sessions/{session_id}/choice")
    def post_choice(session_id: str, body: ChoiceBody):
        session = get_session(session_id)
        with session.lock:
            return session.stage_choice(body)

    @app.post("/api/v1/sessions/{session_id}/step")
    def post_step(session_id: str, body: StepBody | None = None):
        session = get_session(session_id)
        rounds = body.rounds if body else 1
        with session.lock:
            rows = session.step(rounds)
            return {"completed": [r["round"] for r in rows], "phase": session.phase()}

    @app.post("/api/v1/sessions/{session_id}/eve")
    def post_eve(session_id: str, body: EveBody):
        session = get_session(session_id)
        with session.lock:
            return session.set_eve(body)

    @app.post("/api/v1/sessions/{session_id}/channel")
    def post_channel(session_id: str, body: ChannelBody):
        session = get_session(session_id)
        with session.lock:
            return session.set_channel(body)

    @app.post("/api/v1/sessions/{session_id}/reveal")
    def post_reveal(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.reveal()

    @app.post("/api/v1/sessions/{session_id}/compare")
    def post_compare(session_id: str, body: CompareBody | None = None):
        session = get_session(session_id)
        with session.lock:
            return session.compare(body.sample_len if body else None)

    @app.post("/api/v1/sessions/{session_id}/abort")
    def post_abort(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.abort()

    @app.post("/api/v1/sessions/{session_id}/otp")
    def post_otp(session_id: str, body: OtpBody):
        session = get_session(session_id)
        with session.lock:
            return session.otp(body)

    @app.get("/api/v1/sessions/{session_id}/report")
    def get_report(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.report()

    @app.get("/api/v1/sessions/{session_id}/trace.csv")
    def get_trace(session_id: str):
        session = get_session(session_id)
        with session.lock:
            data = session.trace_csv()
        return StreamingResponse(iter([data]), media_type="text/csv")

    @app.get("/api/v1/sessions/{session_id}/log")
    def get_log(session_id: str, role: str = "instructor", after: int = 0):
        session = get_session(session_id)
        with session.lock:
            events = session.events_for(check_role(role), after)
        return {"events": events, "next": events[-1]["id"] if events else after}

    @app.get("/api/v1/sessions/{session_id}/events")
    async def get_events(
        session_id: str,
        request: Request,
        role: str = "instructor",
        after: int = 0,
        once: bool = False,
    ):
        """Server-sent event stream; replays the backlog from `after` (or the
        Last-Event-ID header) and then follows the session live. `once`
        sends the current backlog and closes (polling clients, tests)."""
        session = get_session(session_id)
        check_role(role)
        last_id = request.headers.get("last-event-id")
        cursor = int(last_id) if last_id and last_id.isdigit() else after

        async def stream():
            nonlocal cursor
            idle = 0
            while True:
                with session.lock:
                    events = session.events_for(role, cursor)
                for e in events:
                    cursor = e["id"]
                    yield f"id: {e['id']}\nevent: {e['type']}\ndata: {json.dumps(e['data'])}\n\n"
                if once:
                    return
                if await request.is_disconnected():
                    return
                idle += 1
                if idle >= 100:
                    idle = 0
                    yield ": keep-alive\n\n"
                await asyncio.sleep(0.15)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:
        @app.get("/")
        def index():
            return {
                "service": "qkdsim demo",
                "api": "/api/v1/sessions",
                "hint": "build the frontend and pass --static to serve the UI here",
            }

    return app
