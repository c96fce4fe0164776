import type { Role, SessionEvent, SessionView, VerdictInfo } from "./types.js";

export interface CreateSessionOptions {
  n_bits?: number;
  sample_len?: number;
  abort_mismatch_threshold?: number;
  noise_sigma_volts?: number;
  drift_offset_deg?: number;
  photons_per_pulse?: number | null;
  seed?: number | null;
}

export interface ChoicePayload {
  role: "alice" | "bob";
  bit?: number | null;
  basis?: "HV" | "DAD" | "auto" | null;
}

export interface EvePayload {
  enabled: boolean;
  tap_fraction?: number;
  mode?: "beam" | "photon";
  photon_count?: number;
  seed?: number;
}

export class ApiError extends Error {
  constructor(public status: number, public payload: unknown) {
    super(`service error ${status}: ${JSON.stringify(payload)}`);
  }
}

/**
 * Thin typed wrapper over the /api/v1 session API. Exactly one request per
 * method; no protocol logic lives on the client side.
 */
export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.base}/api/v1${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, payload);
    }
    return payload as T;
  }

  createSession(opts: CreateSessionOptions = {}) {
    return this.request<{ session_id: string; seed: number; n_bits: number }>(
      "POST",
      "/sessions",
      opts,
    );
  }

  view(sessionId: string, role: Role) {
    return this.request<SessionView>("GET", `/sessions/${sessionId}/view?role=${role}`);
  }

  stageChoice(sessionId: string, choice: ChoicePayload) {
    return this.request<{ round: number; staged: { alice: boolean; bob: boolean } }>(
      "POST",
      `/sessions/${sessionId}/choice`,
      choice,
    );
  }

  step(sessionId: string, rounds = 1) {
    return this.request<{ completed: number[]; phase: string }>(
      "POST",
      `/sessions/${sessionId}/step`,
      { rounds },
    );
  }

  setEve(sessionId: string, payload: EvePayload) {
    return this.request<Record<string, unknown>>("POST", `/sessions/${sessionId}/eve`, payload);
  }

  setChannel(sessionId: string, payload: { noise_sigma_volts?: number; drift_offset_deg?: number }) {
    return this.request<Record<string, unknown>>("POST", `/sessions/${sessionId}/channel`, payload);
  }

  reveal(sessionId: string) {
    return this.request<{ revealed: boolean }>("POST", `/sessions/${sessionId}/reveal`);
  }

  compare(sessionId: string, sampleLen?: number) {
    return this.request<VerdictInfo>(
      "POST",
      `/sessions/${sessionId}/compare`,
      sampleLen === undefined ? {} : { sample_len: sampleLen },
    );
  }

  abort(sessionId: string) {
    return this.request<VerdictInfo>("POST", `/sessions/${sessionId}/abort`);
  }

  otp(sessionId: string, body: { plaintext?: string; ciphertext_hex?: string }) {
    return this.request<{ ciphertext_hex?: string; plaintext?: string }>(
      "POST",
      `/sessions/${sessionId}/otp`,
      body,
    );
  }

  report(sessionId: string) {
    return this.request<Record<string, unknown>>("GET", `/sessions/${sessionId}/report`);
  }

  pollLog(sessionId: string, role: Role, after: number) {
    return this.request<{ events: SessionEvent[]; next: number }>(
      "GET",
      `/sessions/${sessionId}/log?role=${role}&after=${after}`,
    );
  }

  /** Live event stream; the server replays from Last-Event-ID on reconnect. */
  subscribe(sessionId: string, role: Role, onEvent: (e: SessionEvent) => void): EventSource {
    const source = new EventSource(`${this.base}/api/v1/sessions/${sessionId}/events?role=${role}`);
    const handler = (msg: MessageEvent, type: string) => {
      onEvent({ id: Number(msg.lastEventId), type, data: JSON.parse(msg.data) });
    };
    for (const type of [
      "session_created",
      "choice_staged",
      "round_completed",
      "eve_changed",
      "channel_changed",
      "revealed",
      "compared",
      "aborted",
    ]) {
      source.addEventListener(type, (msg) => handler(msg as MessageEvent, type));
    }
    return source;
  }
}
