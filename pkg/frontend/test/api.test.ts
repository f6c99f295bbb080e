import { describe, expect, it } from "vitest";

import { Debouncer, ServerError, SessionClient } from "../src/api.js";
import { statesEqual } from "../src/state.js";
import { decodeFrame, makeFakeServer } from "./fake_server.js";

function makeClient() {
  const server = makeFakeServer();
  const client = new SessionClient("http://fake", server.fetch);
  return { server, client };
}

describe("SessionClient", () => {
  it("connect loads state and lights", async () => {
    const { client } = makeClient();
    const state = await client.connect();
    expect(state.f0_scale).toBe(1);
    expect(client.lights).toEqual(["studio", "sunset"]);
  });

  it("mirror equals server state after every acknowledged set", async () => {
    const { server, client } = makeClient();
    await client.connect();
    await client.setParam("f0_scale", 2.5);
    expect(statesEqual(client.state, server.state())).toBe(true);
    await client.setParam("orbit.azimuth", 0.4);
    expect(statesEqual(client.state, server.state())).toBe(true);
    await client.setParam("expression.1", 0.7);
    expect(client.state.expression[1]).toBe(0.7);
    expect(statesEqual(client.state, server.state())).toBe(true);
  });

  it("posts are sent strictly in order", async () => {
    const { server, client } = makeClient();
    await client.connect();
    await Promise.all([
      client.setParams({ f0_scale: 2 }),
      client.setParams({ f0_scale: 3 }),
      client.setParams({ f0_scale: 4 }),
    ]);
    const posts = server.log.filter((l) => l.startsWith("POST"));
    expect(posts).toEqual([
      'POST /params {"f0_scale":2}',
      'POST /params {"f0_scale":3}',
      'POST /params {"f0_scale":4}',
    ]);
    expect(server.state().f0_scale).toBe(4);
  });

  it("server errors surface verbatim and preserve the mirror", async () => {
    const { server, client } = makeClient();
    await client.connect();
    const before = client.state;
    await expect(client.setParams({ light: "nope" }))
      .rejects.toThrow("unknown light 'nope'");
    expect(statesEqual(client.state, before)).toBe(true);
    expect(statesEqual(server.state(), before)).toBe(true);
    // the queue stays usable after a rejection
    await client.setParam("f0_scale", 2);
    expect(server.state().f0_scale).toBe(2);
  });

  it("ServerError carries the HTTP status", async () => {
    const { client } = makeClient();
    await client.connect();
    try {
      await client.setParams({ exposure: 0 });
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ServerError);
      expect((err as ServerError).status).toBe(400);
    }
  });

  it("coalesces concurrent frame requests to a single in-flight", async () => {
    const { server, client } = makeClient();
    await client.connect();
    server.delays.frameMs = 5;
    const [a, b, c] = await Promise.all([
      client.refreshFrame(),
      client.refreshFrame(),
      client.refreshFrame(),
    ]);
    // one in-flight plus one trailing fetch at most
    const gets = server.log.filter((l) => l === "GET /frame.png").length;
    expect(gets).toBeLessThanOrEqual(2);
    expect(decodeFrame(a.data).counter).toBe(decodeFrame(b.data).counter);
    expect(decodeFrame(b.data).counter).toBe(decodeFrame(c.data).counter);
  });

  it("frame reflects the latest acknowledged state", async () => {
    const { client } = makeClient();
    await client.connect();
    await client.setParam("f0_scale", 3);
    const frame = await client.refreshFrame();
    expect(decodeFrame(frame.data).state.f0_scale).toBe(3);
    expect(frame.state.f0_scale).toBe(3);
  });

  it("reconnect restores the server state after a client restart", async () => {
    const { server, client } = makeClient();
    await client.connect();
    await client.setParam("env_yaw", 1.5);
    const fresh = new SessionClient("http://fake", server.fetch);
    const state = await fresh.connect();
    expect(state.env_yaw).toBe(1.5);
    expect(statesEqual(fresh.state, server.state())).toBe(true);
  });
});

describe("sweep", () => {
  it("renders frames left to right in parameter order", async () => {
    const { client } = makeClient();
    await client.connect();
    const frames = await client.sweep("f0_scale", 1, 3, 5);
    expect(frames.map((f) => f.state.f0_scale)).toEqual([1, 1.5, 2, 2.5, 3]);
    const counters = frames.map((f) => decodeFrame(f.data).counter);
    const sorted = [...counters].sort((a, b) => a - b);
    expect(counters).toEqual(sorted);
    // every rendered frame saw its own step value
    for (const f of frames) {
      expect(decodeFrame(f.data).state.f0_scale).toBe(f.state.f0_scale);
    }
  });

  it("rejects degenerate sweeps", async () => {
    const { client } = makeClient();
    await client.connect();
    await expect(client.sweep("f0_scale", 1, 3, 1)).rejects.toThrow();
  });
});

describe("Debouncer", () => {
  it("coalesces bursts and always fires the final value", async () => {
    const seen: number[] = [];
    const d = new Debouncer(10);
    for (let i = 0; i <= 20; i++) d.push(() => seen.push(i));
    await new Promise((r) => setTimeout(r, 30));
    expect(seen).toEqual([20]);
  });

  it("flush fires the pending call immediately", () => {
    const seen: number[] = [];
    const d = new Debouncer(1000);
    d.push(() => seen.push(1));
    d.flush();
    expect(seen).toEqual([1]);
    d.flush(); // idempotent
    expect(seen).toEqual([1]);
  });
});
