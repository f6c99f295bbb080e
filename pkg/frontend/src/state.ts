/**
 * Client mirror of the server session state.
 *
 * The field names are the wire contract of the serve endpoint:
 * GET /state returns the full object, POST /params accepts any subset
 * (orbit may itself be partial) and replies with the full merged state.
 */

export interface Orbit {
  azimuth: number;
  elevation: number;
  distance: number;
}

export interface SessionState {
  expression: number[];
  pose: number[][];
  translation: number[];
  env_yaw: number;
  f0_scale: number;
  roughness_scale: number;
  exposure: number;
  orbit: Orbit;
  light: string;
}

/** Subset of the state accepted by POST /params. */
export type ParamUpdate = Partial<
  Omit<SessionState, "orbit"> & { orbit: Partial<Orbit> }
>;

export function cloneState(s: SessionState): SessionState {
  return JSON.parse(JSON.stringify(s)) as SessionState;
}

/** Local prediction of a merge; the server ack remains authoritative. */
export function mergeState(s: SessionState, u: ParamUpdate): SessionState {
  const out = cloneState(s);
  for (const [key, value] of Object.entries(u)) {
    if (value === undefined) continue;
    if (key === "orbit") {
      Object.assign(out.orbit, value as Partial<Orbit>);
    } else {
      (out as unknown as Record<string, unknown>)[key] = JSON.parse(
        JSON.stringify(value),
      );
    }
  }
  return out;
}

export function statesEqual(a: SessionState, b: SessionState): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}

/**
 * Set one value by dotted path ("f0_scale", "orbit.azimuth", "pose.2.0",
 * "expression.1") and return the minimal ParamUpdate for the server.
 * Array-valued fields are sent whole: the protocol replaces arrays.
 */
export function paramUpdateForPath(
  state: SessionState,
  path: string,
  value: number | string,
): ParamUpdate {
  const parts = path.split(".");
  const head = parts[0];
  switch (head) {
    case "f0_scale":
    case "roughness_scale":
    case "exposure":
    case "env_yaw":
      return { [head]: Number(value) } as ParamUpdate;
    case "light":
      return { light: String(value) };
    case "orbit": {
      if (parts.length !== 2) throw new Error(`bad orbit path '${path}'`);
      return { orbit: { [parts[1]]: Number(value) } as Partial<Orbit> };
    }
    case "expression": {
      const i = Number(parts[1]);
      const arr = state.expression.slice();
      if (!(i >= 0 && i < arr.length)) throw new Error(`bad path '${path}'`);
      arr[i] = Number(value);
      return { expression: arr };
    }
    case "translation": {
      const i = Number(parts[1]);
      const arr = state.translation.slice();
      if (!(i >= 0 && i < arr.length)) throw new Error(`bad path '${path}'`);
      arr[i] = Number(value);
      return { translation: arr };
    }
    case "pose": {
      const j = Number(parts[1]);
      const c = Number(parts[2]);
      const rows = state.pose.map((r) => r.slice());
      if (!rows[j] || !(c >= 0 && c < 3)) throw new Error(`bad path '${path}'`);
      rows[j][c] = Number(value);
      return { pose: rows };
    }
    default:
      throw new Error(`unknown parameter path '${path}'`);
  }
}
