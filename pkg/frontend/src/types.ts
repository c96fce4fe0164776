export type Role = "alice" | "bob" | "instructor";
export type BasisName = "HV" | "DAD";

/** One protocol round as delivered by the service (role-filtered). */
export interface RoundRow {
  round: number;
  alice_bit?: number | null;
  alice_basis?: BasisName | null;
  state?: string | null;
  bob_basis?: BasisName | null;
  ch1_v?: number | null;
  ch2_v?: number | null;
  trit?: string | null;
  kept?: boolean | null;
  key_bit?: number | null;
  eve?: EveRow | null;
}

export interface EveRow {
  tapped: boolean;
  basis: BasisName | null;
  bit: number | null;
}

export interface EveStatus {
  enabled: boolean;
  tap_fraction?: number;
  mode?: "beam" | "photon";
  photon_count?: number;
  seed?: number;
}

export interface VerdictInfo {
  verdict: "key_established" | "aborted";
  sifted_len?: number;
  matching_indices?: number[];
  sample_len?: number;
  mismatches?: number;
  mismatch_rate?: number;
  alice_key?: string;
  bob_key?: string;
  final_key?: string;
  final_bob_key?: string;
  reason_code?: number;
}

export interface SessionView {
  session_id: string;
  role: Role;
  n_bits: number;
  sample_len: number;
  seed: number;
  phase: "encoding" | "comparing" | "done" | "aborted";
  current_round: number;
  staged: { alice: boolean; bob: boolean };
  rows: RoundRow[];
  eve: EveStatus | null;
  verdict: VerdictInfo | null;
  revealed: boolean;
}

export interface SessionEvent {
  id: number;
  type: string;
  data: Record<string, unknown>;
}

/** Flat transcript record, field-for-field the service report row schema. */
export interface TranscriptRecord {
  phase: "sending" | "receiving" | "comparing" | "key";
  index: number;
  alice_bit: number | null;
  alice_basis: string | null;
  state: string | null;
  bob_basis: string | null;
  trit: string | null;
  kept: boolean | null;
  key_bit: number | null;
}
