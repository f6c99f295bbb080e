import { describe, expect, it } from "vitest";

import {
  SessionState,
  cloneState,
  mergeState,
  paramUpdateForPath,
  statesEqual,
} from "../src/state.js";

function base(): SessionState {
  return {
    expression: [0, 0, 0],
    pose: [[0, 0, 0], [0, 0, 0], [0, 0, 0]],
    translation: [0, 0, 0],
    env_yaw: 0,
    f0_scale: 1,
    roughness_scale: 1,
    exposure: 1,
    orbit: { azimuth: 0, elevation: 0, distance: 0.42 },
    light: "studio",
  };
}

describe("state mirror", () => {
  it("clone is deep", () => {
    const s = base();
    const c = cloneState(s);
    c.pose[1][0] = 9;
    c.orbit.azimuth = 9;
    expect(s.pose[1][0]).toBe(0);
    expect(s.orbit.azimuth).toBe(0);
  });

  it("merge applies partial orbit without losing fields", () => {
    const merged = mergeState(base(), { orbit: { azimuth: 0.5 } });
    expect(merged.orbit).toEqual({ azimuth: 0.5, elevation: 0,
                                   distance: 0.42 });
  });

  it("merge replaces arrays whole", () => {
    const merged = mergeState(base(), { expression: [1, 2, 3] });
    expect(merged.expression).toEqual([1, 2, 3]);
  });

  it("statesEqual detects drift", () => {
    const a = base();
    const b = mergeState(a, { f0_scale: 2 });
    expect(statesEqual(a, a)).toBe(true);
    expect(statesEqual(a, b)).toBe(false);
  });
});

describe("paramUpdateForPath", () => {
  it("scalar paths produce scalar updates", () => {
    expect(paramUpdateForPath(base(), "f0_scale", 2.5))
      .toEqual({ f0_scale: 2.5 });
    expect(paramUpdateForPath(base(), "env_yaw", "0.7"))
      .toEqual({ env_yaw: 0.7 });
  });

  it("orbit paths stay partial", () => {
    expect(paramUpdateForPath(base(), "orbit.distance", 0.6))
      .toEqual({ orbit: { distance: 0.6 } });
  });

  it("indexed paths send the whole array with one element changed", () => {
    const u = paramUpdateForPath(base(), "expression.1", 0.8);
    expect(u).toEqual({ expression: [0, 0.8, 0] });
    const p = paramUpdateForPath(base(), "pose.2.0", 0.3);
    expect(p).toEqual({ pose: [[0, 0, 0], [0, 0, 0], [0.3, 0, 0]] });
  });

  it("light path passes strings through", () => {
    expect(paramUpdateForPath(base(), "light", "sunset"))
      .toEqual({ light: "sunset" });
  });

  it("rejects unknown or malformed paths", () => {
    expect(() => paramUpdateForPath(base(), "nope", 1)).toThrow();
    expect(() => paramUpdateForPath(base(), "expression.9", 1)).toThrow();
    expect(() => paramUpdateForPath(base(), "pose.1.7", 1)).toThrow();
  });
});
