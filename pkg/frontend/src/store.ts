import type {
  EveStatus,
  Role,
  RoundRow,
  SessionEvent,
  SessionView,
  TranscriptRecord,
  VerdictInfo,
} from "./types.js";

export interface ConsoleState {
  sessionId: string | null;
  role: Role;
  nBits: number;
  phase: string;
  currentRound: number;
  staged: { alice: boolean; bob: boolean };
  rows: RoundRow[];
  eve: EveStatus | null;
  verdict: VerdictInfo | null;
  revealed: boolean;
  lastEventId: number;
}

function emptyState(role: Role): ConsoleState {
  return {
    sessionId: null,
    role,
    nBits: 0,
    phase: "encoding",
    currentRound: 0,
    staged: { alice: false, bob: false },
    rows: [],
    eve: null,
    verdict: null,
    revealed: false,
    lastEventId: 0,
  };
}

/**
 * Role console state. Holds nothing but what the service sent for this
 * role: rows render only confirmed data, hidden fields simply never arrive,
 * and no protocol outcome (sifting, verdict, key) is ever computed locally.
 */
export class ConsoleStore {
  state: ConsoleState;
  private listeners: Array<() => void> = [];

  constructor(public readonly role: Role) {
    this.state = emptyState(role);
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Replace state wholesale from a role-filtered view fetch. */
  loadView(view: SessionView): void {
    this.state = {
      sessionId: view.session_id,
      role: this.role,
      nBits: view.n_bits,
      phase: view.phase,
      currentRound: view.current_round,
      staged: view.staged,
      rows: view.rows,
      eve: view.eve,
      verdict: view.verdict,
      revealed: view.revealed,
      lastEventId: this.state.lastEventId,
    };
    this.notify();
  }

  /** Fold one server event into the console state. */
  applyEvent(event: SessionEvent): void {
    if (event.id <= this.state.lastEventId) return;
    this.state.lastEventId = event.id;
    const data = event.data as Record<string, unknown>;
    switch (event.type) {
      case "session_created":
        this.state.nBits = (data.n_bits as number) ?? this.state.nBits;
        break;
      case "choice_staged": {
        const who = data.role as "alice" | "bob";
        if (who) this.state.staged[who] = true;
        break;
      }
      case "round_completed": {
        const round = data.round as number;
        const row: RoundRow = { round };
        for (const [k, v] of Object.entries(data)) {
          if (k !== "round") (row as unknown as Record<string, unknown>)[k] = v;
        }
        this.state.rows[round] = row;
        this.state.currentRound = round + 1;
        this.state.staged = { alice: false, bob: false };
        if (this.state.currentRound >= this.state.nBits) this.state.phase = "comparing";
        break;
      }
      case "eve_changed":
        this.state.eve = data as unknown as EveStatus;
        break;
      case "revealed":
        this.state.revealed = true;
        break;
      case "compared": {
        const { rows, ...verdict } = data as { rows?: RoundRow[] } & Record<string, unknown>;
        if (rows) this.state.rows = rows;
        this.state.verdict = verdict as unknown as VerdictInfo;
        this.state.phase = "done";
        this.state.revealed = true;
        break;
      }
      case "aborted":
        this.state.verdict = { verdict: "aborted", reason_code: data.reason_code as number };
        this.state.phase = "aborted";
        break;
    }
    this.notify();
  }

  serialize(): string {
    return JSON.stringify(this.state);
  }

  /**
   * Flat transcript table in the service report's row schema. Available only
   * once the service has revealed the comparison; the client never sifts or
   * assigns key bits itself, so this is null before then.
   */
  exportTranscript(): TranscriptRecord[] | null {
    const { verdict, rows, revealed } = this.state;
    if (!revealed || !verdict || verdict.matching_indices === undefined) return null;
    const record = (phase: TranscriptRecord["phase"], index: number): TranscriptRecord => ({
      phase,
      index,
      alice_bit: null,
      alice_basis: null,
      state: null,
      bob_basis: null,
      trit: null,
      kept: null,
      key_bit: null,
    });
    const out: TranscriptRecord[] = [];
    for (const row of rows) {
      const r = record("sending", row.round);
      r.alice_bit = row.alice_bit ?? null;
      r.alice_basis = row.alice_basis ?? null;
      r.state = row.state ?? null;
      out.push(r);
    }
    for (const row of rows) {
      const r = record("receiving", row.round);
      r.bob_basis = row.bob_basis ?? null;
      r.trit = row.trit ?? null;
      out.push(r);
    }
    for (const row of rows) {
      const r = record("comparing", row.round);
      r.kept = row.kept ?? null;
      out.push(r);
    }
    for (const row of rows) {
      if (row.key_bit !== null && row.key_bit !== undefined) {
        const r = record("key", row.round);
        r.key_bit = row.key_bit;
        out.push(r);
      }
    }
    return out;
  }
}
