import type { ConsoleStore } from "./store.js";
import type { RoundRow } from "./types.js";

export interface Controls {
  stageAlice(bit: number | "auto", basis: "HV" | "DAD" | "auto"): void;
  stageBob(basis: "HV" | "DAD" | "auto"): void;
  step(rounds: number): void;
  runRemaining(): void;
  setEve(enabled: boolean, tap: number): void;
  setChannel(noise: number, drift: number): void;
  reveal(): void;
  compare(sampleLen?: number): void;
  abort(): void;
  otp(plaintext: string): Promise<string>;
  downloadTranscript(): void;
}

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function voltageBars(row: RoundRow): HTMLElement {
  const wrap = el("div", "bars");
  for (const [label, value] of [
    ["ch1", row.ch1_v ?? 0],
    ["ch2", row.ch2_v ?? 0],
  ] as const) {
    const line = el("div", "bar-line");
    line.append(el("span", "bar-label", label));
    const track = el("div", "bar-track");
    const fill = el("div", `bar-fill ${label}`);
    fill.style.width = `${Math.max(0, Math.min(1, value)) * 100}%`;
    track.append(fill);
    line.append(track);
    line.append(el("span", "bar-value", `${value.toFixed(2)} V`));
    wrap.append(line);
  }
  return wrap;
}

const COLUMNS: Array<[string, (r: RoundRow) => string]> = [
  ["round", (r) => String(r.round)],
  ["alice bit", (r) => fmt(r.alice_bit)],
  ["alice basis", (r) => fmt(r.alice_basis)],
  ["state", (r) => fmt(r.state)],
  ["bob basis", (r) => fmt(r.bob_basis)],
  ["ch1 V", (r) => (r.ch1_v === undefined || r.ch1_v === null ? "·" : r.ch1_v.toFixed(2))],
  ["ch2 V", (r) => (r.ch2_v === undefined || r.ch2_v === null ? "·" : r.ch2_v.toFixed(2))],
  ["trit", (r) => fmt(r.trit)],
  ["kept", (r) => (r.kept === null || r.kept === undefined ? "·" : r.kept ? "yes" : "no")],
  ["key bit", (r) => fmt(r.key_bit)],
  ["eve", (r) => (r.eve ? (r.eve.tapped ? `tap ${r.eve.basis}→${r.eve.bit}` : "pass") : "·")],
];

function fmt(v: unknown): string {
  return v === undefined || v === null ? "·" : String(v);
}

function transcriptTable(store: ConsoleStore): HTMLElement {
  const table = el("table", "transcript") as HTMLTableElement;
  const head = table.createTHead().insertRow();
  for (const [name] of COLUMNS) head.append(el("th", undefined, name));
  const body = table.createTBody();
  for (const row of store.state.rows) {
    const tr = body.insertRow();
    if (row.kept === false) tr.className = "dropped";
    if (row.kept === true) tr.className = "kept";
    for (const [, render] of COLUMNS) {
      const td = tr.insertCell();
      td.textContent = render(row);
    }
  }
  return table;
}

function alicePanel(store: ConsoleStore, controls: Controls): HTMLElement {
  const panel = el("section", "panel");
  panel.append(el("h2", undefined, "Alice — transmitter"));
  const form = el("div", "controls");
  const bit = pick("bit", ["0", "1", "auto"]);
  const basis = pick("basis", ["HV", "DAD", "auto"]);
  const send = el("button", "primary", "Set choice") as HTMLButtonElement;
  send.onclick = () => {
    const b = bit.value === "auto" ? "auto" : Number(bit.value);
    controls.stageAlice(b as number | "auto", basis.value as "HV" | "DAD" | "auto");
  };
  form.append(bit.node, basis.node, send);
  panel.append(form);
  return panel;
}

function bobPanel(store: ConsoleStore, controls: Controls): HTMLElement {
  const panel = el("section", "panel");
  panel.append(el("h2", undefined, "Bob — receiver"));
  const form = el("div", "controls");
  const basis = pick("measurement basis", ["HV", "DAD", "auto"]);
  const set = el("button", "primary", "Set basis") as HTMLButtonElement;
  set.onclick = () => controls.stageBob(basis.value as "HV" | "DAD" | "auto");
  form.append(basis.node, set);
  panel.append(form);
  const latest = store.state.rows[store.state.rows.length - 1];
  if (latest) {
    panel.append(el("h3", undefined, `round ${latest.round} detectors`));
    panel.append(voltageBars(latest));
  }
  return panel;
}

function instructorPanel(store: ConsoleStore, controls: Controls): HTMLElement {
  const panel = el("section", "panel");
  panel.append(el("h2", undefined, "Instructor"));
  const form = el("div", "controls");

  const eveToggle = el("button", "", "") as HTMLButtonElement;
  const enabled = store.state.eve?.enabled ?? false;
  eveToggle.textContent = enabled ? "Disable Eve" : "Enable Eve";
  eveToggle.className = enabled ? "danger" : "";
  const tap = el("input") as HTMLInputElement;
  tap.type = "range";
  tap.min = "0";
  tap.max = "1";
  tap.step = "0.05";
  tap.value = String(store.state.eve?.tap_fraction ?? 1.0);
  tap.title = "tap fraction";
  eveToggle.onclick = () => controls.setEve(!enabled, Number(tap.value));

  const step = el("button", "", "Transmit round") as HTMLButtonElement;
  step.onclick = () => controls.step(1);
  const runAll = el("button", "", "Run remaining") as HTMLButtonElement;
  runAll.onclick = () => controls.runRemaining();
  const compare = el("button", "primary", "Compare bases") as HTMLButtonElement;
  compare.onclick = () => controls.compare();
  const reveal = el("button", "", "Reveal all") as HTMLButtonElement;
  reveal.onclick = () => controls.reveal();
  const abort = el("button", "danger", "Abort") as HTMLButtonElement;
  abort.onclick = () => controls.abort();

  form.append(eveToggle, tap, step, runAll, compare, reveal, abort);
  panel.append(form);

  const knobs = el("div", "controls");
  const noise = slider("noise V", 0, 0.2, 0.005, 0.02);
  const drift = slider("drift °", -90, 90, 1, 0);
  const apply = el("button", "", "Set channel") as HTMLButtonElement;
  apply.onclick = () => controls.setChannel(noise.value, drift.value);
  knobs.append(noise.node, drift.node, apply);
  panel.append(knobs);
  return panel;
}

function slider(label: string, min: number, max: number, step: number, initial: number) {
  const wrap = el("label", "pick");
  wrap.append(el("span", undefined, label));
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = String(initial);
  const value = el("span", "bar-value", String(initial));
  input.oninput = () => (value.textContent = input.value);
  wrap.append(input, value);
  return {
    node: wrap,
    get value() {
      return Number(input.value);
    },
  };
}

function verdictBanner(store: ConsoleStore, controls: Controls): HTMLElement {
  const v = store.state.verdict;
  const banner = el("section", "panel verdict");
  if (!v) return banner;
  if (v.verdict === "key_established" && v.sifted_len === 0) {
    banner.classList.add("bad");
    banner.append(el("h2", undefined, "No key this run"));
    banner.append(
      el(
        "p",
        undefined,
        "the bases never matched, so every round was discarded at sifting; run a fresh session",
      ),
    );
    const retry = el("button", "primary", "Start a fresh session") as HTMLButtonElement;
    retry.onclick = () => window.location.reload();
    banner.append(retry);
    return banner;
  }
  if (v.verdict === "key_established") {
    banner.classList.add("good");
    banner.append(el("h2", undefined, "Key established"));
    banner.append(
      el(
        "p",
        undefined,
        `sifted ${v.sifted_len}, sampled ${v.sample_len} (mismatch rate ${v.mismatch_rate}),` +
          ` final key ${v.final_key?.length ?? 0} bits`,
      ),
    );
    if (v.alice_key !== undefined) {
      banner.append(el("p", "key", `alice sifted: ${v.alice_key}`));
      banner.append(el("p", "key", `bob sifted:   ${v.bob_key}`));
      banner.append(el("p", "key strong", `final key:    ${v.final_key}`));
    }
    const otpRow = el("div", "controls");
    const input = el("input") as HTMLInputElement;
    input.placeholder = "message to encrypt with the key";
    const btn = el("button", "primary", "Encrypt") as HTMLButtonElement;
    const out = el("p", "key");
    btn.onclick = async () => {
      out.textContent = `ciphertext: ${await controls.otp(input.value)}`;
    };
    otpRow.append(input, btn);
    banner.append(otpRow, out);
  } else {
    banner.classList.add("bad");
    banner.append(el("h2", undefined, "Aborted"));
    banner.append(
      el(
        "p",
        undefined,
        v.mismatch_rate !== undefined
          ? `sample mismatch rate ${v.mismatch_rate} — someone listened; try another channel or another time`
          : "session aborted by the operator",
      ),
    );
    const retry = el("button", "primary", "Start a fresh session") as HTMLButtonElement;
    retry.onclick = () => window.location.reload();
    banner.append(retry);
  }
  const dl = el("button", "", "Export transcript") as HTMLButtonElement;
  dl.onclick = () => controls.downloadTranscript();
  banner.append(dl);
  return banner;
}

export function render(root: HTMLElement, store: ConsoleStore, controls: Controls): void {
  const { role } = store;
  const s = store.state;
  root.replaceChildren();
  const header = el("header");
  header.append(el("h1", undefined, `qkdsim — ${role} console`));
  header.append(
    el(
      "p",
      "status",
      `session ${s.sessionId ?? "–"} · phase ${s.phase} · round ${s.currentRound}/${s.nBits}` +
        ` · staged a:${s.staged.alice ? "✓" : "·"} b:${s.staged.bob ? "✓" : "·"}`,
    ),
  );
  root.append(header);

  if (role === "alice" || role === "instructor") root.append(alicePanel(store, controls));
  if (role === "bob" || role === "instructor") root.append(bobPanel(store, controls));
  if (role === "instructor") root.append(instructorPanel(store, controls));
  if (role !== "instructor" && s.phase === "comparing") {
    const go = el("button", "primary", "Compare bases") as HTMLButtonElement;
    go.onclick = () => controls.compare();
    const panel = el("section", "panel");
    panel.append(go);
    root.append(panel);
  }
  if (s.verdict) root.append(verdictBanner(store, controls));

  const tablePanel = el("section", "panel");
  tablePanel.append(el("h2", undefined, "Transcript"));
  tablePanel.append(transcriptTable(store));
  root.append(tablePanel);
}

function pick(label: string, options: string[]): { node: HTMLElement; value: string } {
  const wrap = el("label", "pick");
  wrap.append(el("span", undefined, label));
  const select = document.createElement("select");
  for (const opt of options) {
    const o = document.createElement("option");
    o.value = opt;
    o.textContent = opt;
    select.append(o);
  }
  wrap.append(select);
  return {
    node: wrap,
    get value() {
      return select.value;
    },
  };
}
