import { describe, expect, it } from "vitest";
import { ConsoleStore } from "../src/store.js";
import type { SessionEvent, SessionView, TranscriptRecord } from "../src/types.js";
import fixture from "./fixtures/session16.json";

const instructorEvents = fixture.instructor_events as SessionEvent[];
const bobEventsPreCompare = fixture.bob_events_precompare as SessionEvent[];
const reportRows = (fixture.report as { rows: TranscriptRecord[] }).rows;

function instructorStore(): ConsoleStore {
  const store = new ConsoleStore("instructor");
  for (const event of instructorEvents) store.applyEvent(event);
  return store;
}

describe("transcript parity (acceptance)", () => {
  it("exported UI table equals the service report rows field-for-field", () => {
    const store = instructorStore();
    const exported = store.exportTranscript();
    expect(exported).not.toBeNull();
    expect(exported!.length).toBe(reportRows.length);
    exported!.forEach((row, i) => {
      expect(row).toStrictEqual(reportRows[i]);
    });
  });

  it("reaches the same table when hydrated from a view fetch instead", () => {
    const store = new ConsoleStore("instructor");
    store.loadView(fixture.instructor_view as unknown as SessionView);
    expect(store.exportTranscript()).toStrictEqual(reportRows);
  });

  it("final key in the verdict matches the key rows", () => {
    const store = instructorStore();
    const keyBits = store
      .exportTranscript()!
      .filter((r) => r.phase === "key")
      .map((r) => r.key_bit)
      .join("");
    expect(keyBits).toBe(store.state.verdict!.final_key);
  });
});

describe("information hygiene (acceptance)", () => {
  it("bob console state before compare holds no alice bit values", () => {
    const store = new ConsoleStore("bob");
    for (const event of bobEventsPreCompare) store.applyEvent(event);
    const blob = store.serialize();
    expect(blob).not.toContain("alice_bit");
    expect(blob).not.toContain('"state"');
    expect(blob).not.toContain("tapped"); // eavesdropper activity is hidden too
    expect(store.state.phase).toBe("comparing");
    expect(store.state.rows).toHaveLength(16);
  });

  it("bob console state hydrated from a view fetch is equally clean", () => {
    const store = new ConsoleStore("bob");
    store.loadView(fixture.bob_view_precompare as unknown as SessionView);
    const blob = store.serialize();
    expect(blob).not.toContain("alice_bit");
    expect(blob).not.toContain('"state"');
  });

  it("bob still sees his own readout", () => {
    const store = new ConsoleStore("bob");
    for (const event of bobEventsPreCompare) store.applyEvent(event);
    const row = store.state.rows[0];
    expect(row.bob_basis).toBeDefined();
    expect(row.trit).toBeDefined();
    expect(row.ch1_v).toBeDefined();
  });
});

describe("thin client rule", () => {
  it("cannot produce a transcript before the service reveals the comparison", () => {
    const store = new ConsoleStore("instructor");
    for (const event of instructorEvents) {
      if (event.type === "compared") break;
      store.applyEvent(event);
    }
    // All 16 rounds are present, yet the client refuses to sift on its own.
    expect(store.state.rows).toHaveLength(16);
    expect(store.exportTranscript()).toBeNull();
    expect(store.state.verdict).toBeNull();
  });

  it("kept/key fields come only from the service", () => {
    const store = new ConsoleStore("instructor");
    for (const event of instructorEvents) {
      if (event.type === "compared") break;
      store.applyEvent(event);
    }
    for (const row of store.state.rows) {
      expect(row.kept ?? null).toBeNull();
      expect(row.key_bit ?? null).toBeNull();
    }
  });

  it("events are idempotent under replay (stale-session recovery)", () => {
    const store = instructorStore();
    const before = store.serialize();
    for (const event of instructorEvents) store.applyEvent(event); // replay all
    expect(store.serialize()).toBe(before);
  });
});
