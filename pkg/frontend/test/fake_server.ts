/** In-memory fake of the serve endpoint for unit tests (mirrors the
 * protocol: partial merges, validation errors, PNG-ish frame bytes). */

import { FetchLike } from "../src/api.js";
import { SessionState } from "../src/state.js";

export interface FakeServer {
  fetch: FetchLike;
  state: () => SessionState;
  log: string[];
  delays: { frameMs: number };
}

const KNOWN = new Set([
  "expression", "pose", "translation", "env_yaw", "f0_scale",
  "roughness_scale", "exposure", "orbit", "light",
]);

export function makeFakeServer(nExpr = 4, nJoints = 4): FakeServer {
  let state: SessionState = {
    expression: new Array(nExpr).fill(0),
    pose: Array.from({ length: nJoints + 1 }, () => [0, 0, 0]),
    translation: [0, 0, 0],
    env_yaw: 0,
    f0_scale: 1,
    roughness_scale: 1,
    exposure: 1,
    orbit: { azimuth: 0, elevation: 0, distance: 0.42 },
    light: "studio",
  };
  const log: string[] = [];
  const delays = { frameMs: 0 };
  let frameCounter = 0;

  function json(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }

  async function handle(url: string, init?: RequestInit): Promise<Response> {
    const path = new URL(url, "http://fake").pathname;
    if (path === "/state") {
      log.push("GET /state");
      return json(200, state);
    }
    if (path === "/lights") {
      log.push("GET /lights");
      return json(200, { lights: ["studio", "sunset"] });
    }
    if (path === "/frame.png") {
      log.push("GET /frame.png");
      frameCounter += 1;
      if (delays.frameMs > 0) {
        await new Promise((r) => setTimeout(r, delays.frameMs));
      }
      // payload encodes the state snapshot at render time, like a real frame
      const body = new TextEncoder().encode(
        `frame#${frameCounter}:` + JSON.stringify(state),
      );
      return new Response(body, {
        status: 200,
        headers: { "Content-Type": "image/png" },
      });
    }
    if (path === "/params" && init?.method === "POST") {
      const update = JSON.parse(String(init.body)) as Record<string, unknown>;
      log.push("POST /params " + JSON.stringify(update));
      const staged: Record<string, unknown> = {};
      for (const [key, value] of Object.entries(update)) {
        if (!KNOWN.has(key)) {
          return json(400, { error: `unknown field '${key}'` });
        }
        if (key === "exposure" && (value as number) <= 0) {
          return json(400, { error: "field 'exposure' must be > 0" });
        }
        if (key === "expression"
            && (value as number[]).length !== state.expression.length) {
          return json(400, {
            error: `field 'expression' must be ${state.expression.length} `
              + "finite numbers",
          });
        }
        if (key === "light" && value !== "studio" && value !== "sunset") {
          return json(400, { error: `unknown light '${value}'` });
        }
        staged[key] = key === "orbit"
          ? { ...state.orbit, ...(value as object) }
          : value;
      }
      state = { ...state, ...(staged as Partial<SessionState>) };
      return json(200, state);
    }
    return json(404, { error: `no route ${path}` });
  }

  return { fetch: handle, state: () => state, log, delays };
}

export function decodeFrame(data: Uint8Array): {
  counter: number;
  state: SessionState;
} {
  const text = new TextDecoder().decode(data);
  const sep = text.indexOf(":");
  return {
    counter: Number(text.slice(6, sep)),
    state: JSON.parse(text.slice(sep + 1)) as SessionState,
  };
}
