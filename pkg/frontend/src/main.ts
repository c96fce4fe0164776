import { ApiClient } from "./api.js";
import { ConsoleStore } from "./store.js";
import { render, type Controls } from "./views.js";
import type { Role } from "./types.js";

function param(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

async function joinOrCreate(api: ApiClient, role: Role): Promise<string> {
  const fromUrl = param("session");
  if (fromUrl) return fromUrl;
  if (role !== "instructor") {
    const id = window.prompt("session id (ask the instructor):") ?? "";
    return id.trim();
  }
  const nBits = Number(param("bits") ?? 16);
  const sampleLen = Number(param("sample") ?? 0);
  const created = await api.createSession({ n_bits: nBits, sample_len: sampleLen });
  const url = new URL(window.location.href);
  url.searchParams.set("session", created.session_id);
  window.history.replaceState(null, "", url.toString());
  return created.session_id;
}

async function boot(): Promise<void> {
  const role = (param("role") ?? "instructor") as Role;
  const api = new ApiClient("");
  const store = new ConsoleStore(role);
  const root = document.getElementById("app")!;

  const sessionId = await joinOrCreate(api, role);
  store.loadView(await api.view(sessionId, role));

  const refresh = async () => store.loadView(await api.view(sessionId, role));

  const controls: Controls = {
    stageAlice: async (bit, basis) => {
      await api.stageChoice(sessionId, {
        role: "alice",
        bit: bit === "auto" ? null : bit,
        basis,
      });
    },
    stageBob: async (basis) => {
      await api.stageChoice(sessionId, { role: "bob", basis });
    },
    step: async (rounds) => {
      await api.step(sessionId, rounds);
    },
    runRemaining: async () => {
      await api.step(sessionId, Math.max(1, store.state.nBits - store.state.currentRound));
    },
    setEve: async (enabled, tap) => {
      await api.setEve(sessionId, { enabled, tap_fraction: tap });
      await refresh();
    },
    setChannel: async (noise, drift) => {
      await api.setChannel(sessionId, { noise_sigma_volts: noise, drift_offset_deg: drift });
    },
    reveal: async () => {
      await api.reveal(sessionId);
    },
    compare: async (sampleLen) => {
      await api.compare(sessionId, sampleLen);
    },
    abort: async () => {
      await api.abort(sessionId);
    },
    otp: async (plaintext) => {
      const out = await api.otp(sessionId, { plaintext });
      return out.ciphertext_hex ?? "";
    },
    downloadTranscript: () => {
      const table = store.exportTranscript();
      if (!table) return;
      const blob = new Blob([JSON.stringify(table, null, 2)], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `qkdsim-${sessionId}-transcript.json`;
      a.click();
      URL.revokeObjectURL(a.href);
    },
  };

  store.onChange(() => render(root, store, controls));
  render(root, store, controls);

  const source = api.subscribe(sessionId, role, (event) => {
    store.applyEvent(event);
    if (event.type === "revealed") void refresh(); // fetch previously hidden fields
  });
  source.onerror = () => {
    // EventSource reconnects on its own with Last-Event-ID; refresh the view
    // once it comes back so a long outage cannot leave the table stale.
    source.onopen = () => void refresh();
  };
}

boot().catch((err) => {
  const root = document.getElementById("app");
  if (root) {
    root.textContent = `service unreachable: ${err}`;
    root.className = "fatal";
  }
});
