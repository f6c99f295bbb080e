/**
 * Headless driver for the viewer-consistency check.
 *
 * Runs scripted interaction sequences against a live serve endpoint with
 * the same SessionClient the UI uses; after the final acknowledgment of
 * each sequence it saves the displayed frame plus the mirrored state, so
 * the caller can re-render the state through the CLI and compare bytes.
 *
 * Usage: node dist/consistency.js <server-url> <out-dir>
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { SessionClient } from "./api.js";

type Step = [path: string, value: number | string];

function sequences(nExpr: number, jawIndex: number): Step[][] {
  const seqs: Step[][] = [
    [["f0_scale", 2.0]],
    [["f0_scale", 1.5], ["roughness_scale", 0.8], ["exposure", 1.3]],
    [["orbit.azimuth", 0.4], ["orbit.elevation", 0.15]],
    [["orbit.azimuth", -0.6], ["orbit.distance", 0.55], ["env_yaw", 1.2]],
    [[`pose.${jawIndex}.0`, 0.3]],
    [[`pose.${jawIndex}.0`, 0.2], ["pose.0.1", 0.35], ["exposure", 0.9]],
    [["expression.0", 0.8]],
    [["expression.0", 0.4], [`expression.${Math.min(1, nExpr - 1)}`, 0.6],
     ["env_yaw", 2.5]],
    [["translation.0", 0.02], ["translation.1", -0.01]],
    [["f0_scale", 3.0], ["roughness_scale", 1.2], ["orbit.azimuth", 0.2],
     ["env_yaw", 0.7], ["expression.0", 0.5]],
  ];
  return seqs;
}

async function run(): Promise<void> {
  const [, , baseUrl, outDir] = process.argv;
  if (!baseUrl || !outDir) {
    console.error("usage: node consistency.js <server-url> <out-dir>");
    process.exit(2);
  }
  mkdirSync(outDir, { recursive: true });

  const client = new SessionClient(baseUrl);
  const initial = await client.connect();
  const jawIndex = Math.min(2, initial.pose.length - 1);

  const results: object[] = [];
  for (const [i, seq] of sequences(initial.expression.length,
                                   jawIndex).entries()) {
    for (const [path, value] of seq) {
      await client.setParam(path, value);
    }
    const frame = await client.refreshFrame();
    writeFileSync(join(outDir, `seq_${String(i).padStart(2, "0")}.png`),
                  frame.data);
    writeFileSync(join(outDir, `seq_${String(i).padStart(2, "0")}.json`),
                  JSON.stringify(frame.state, null, 1));
    results.push({ sequence: i, steps: seq.length });
  }

  // env-yaw periodicity: 0 vs 2*pi must produce identical frames
  await client.setParam("env_yaw", 0.0);
  const yaw0 = await client.refreshFrame();
  await client.setParam("env_yaw", 2.0 * Math.PI);
  const yaw2pi = await client.refreshFrame();
  writeFileSync(join(outDir, "yaw_0.png"), yaw0.data);
  writeFileSync(join(outDir, "yaw_2pi.png"), yaw2pi.data);

  writeFileSync(join(outDir, "manifest.json"),
                JSON.stringify({ sequences: results.length }, null, 1));
  console.log(`wrote ${results.length} sequences to ${outDir}`);
}

run().catch((err) => {
  console.error(err);
  process.exit(1);
});
