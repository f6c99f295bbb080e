"""Interactive rendering session over HTTP, driven by the companion viewer.

One rendering session per process. Protocol (all JSON unless noted):

  GET  /state      -> full session state
  POST /params     -> partial state merge; unknown fields or bad values are
                      rejected with {"error": ...} and leave state unchanged
  GET  /frame.png  -> PNG render of the current state (image/png)
  GET  /lights     -> {"lights": [names...]}
  GET  /<path>     -> static viewer assets when a static dir is configured

State fields (the wire contract, mirrored by the viewer):

  expression        list[float], length |expr|
  pose              list[list[float]] (K+1) x 3 axis-angle radians
  translation       [x, y, z]
  env_yaw           float radians
  f0_scale          float >= 0
  roughness_scale   float > 0
  exposure          float > 0
  orbit             {"azimuth": rad, "elevation": rad, "distance": m}
  light             str, one of GET /lights

Renders and param posts are serialized behind one lock; GET /state never
blocks on a render.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import io as gio
from .core import EnvironmentLight, GaussianCloud, PoseState, Rig
from .pipeline import png_bytes, render_frame
from .shade import ShadeParams
from .toyrig import orbit_camera

__all__ = ["AvatarSession", "serve", "make_server"]

DEFAULT_ORBIT = {"azimuth": 0.0, "elevation": 0.0, "distance": 0.42}


class SessionError(ValueError):
    """Invalid param post; the session state is unchanged."""


class AvatarSession:
    """Session state + rendering; thread-safe via an internal lock."""

    def __init__(self, cloud: GaussianCloud, rig: Rig,
                 lights: dict[str, EnvironmentLight], size: int = 512):
        if not lights:
            raise ValueError("serve needs at least one light asset")
        self.cloud = cloud
        self.rig = rig
        self.lights = lights
        self.size = int(size)
        self._lock = threading.Lock()
        first = sorted(lights)[0]
        self._state = {
            "expression": [0.0] * cloud.n_expr,
            "pose": [[0.0, 0.0, 0.0] for _ in range(cloud.n_joints + 1)],
            "translation": [0.0, 0.0, 0.0],
            "env_yaw": 0.0,
            "f0_scale": 1.0,
            "roughness_scale": 1.0,
            "exposure": 1.0,
            "orbit": dict(DEFAULT_ORBIT),
            "light": first,
        }

    # -- state ---------------------------------------------------------------

    def get_state(self) -> dict:
        return json.loads(json.dumps(self._state))

    def _validated(self, field: str, value):
        state = self._state

        def _floats(v, n, what):
            arr = np.asarray(v, dtype=np.float64)
            if arr.shape != (n,) or not np.isfinite(arr).all():
                raise SessionError(
                    f"field '{what}' must be {n} finite numbers")
            return [float(x) for x in arr]

        if field == "expression":
            return _floats(value, self.cloud.n_expr, field)
        if field == "translation":
            return _floats(value, 3, field)
        if field == "pose":
            arr = np.asarray(value, dtype=np.float64)
            want = (self.cloud.n_joints + 1, 3)
            if arr.shape != want or not np.isfinite(arr).all():
                raise SessionError(f"field 'pose' must be {want[0]}x3 finite "
                                   "axis-angles")
            return [[float(x) for x in row] for row in arr]
        if field in ("env_yaw", "f0_scale", "roughness_scale", "exposure"):
            try:
                v = float(value)
            except (TypeError, ValueError):
                raise SessionError(f"field '{field}' must be a number")
            if not np.isfinite(v):
                raise SessionError(f"field '{field}' must be finite")
            if field == "f0_scale" and v < 0:
                raise SessionError("field 'f0_scale' must be >= 0")
            if field in ("roughness_scale", "exposure") and v <= 0:
                raise SessionError(f"field '{field}' must be > 0")
            return v
        if field == "orbit":
            if not isinstance(value, dict):
                raise SessionError("field 'orbit' must be an object")
            orbit = dict(state["orbit"])
            for k, v in value.items():
                if k not in DEFAULT_ORBIT:
                    raise SessionError(f"unknown orbit field '{k}'")
                v = float(v)
                if not np.isfinite(v):
                    raise SessionError(f"orbit field '{k}' must be finite")
                if k == "distance" and v <= 0:
                    raise SessionError("orbit distance must be > 0")
                orbit[k] = v
            return orbit
        if field == "light":
            if value not in self.lights:
                raise SessionError(
                    f"unknown light '{value}' (have: {sorted(self.lights)})")
            return value
        raise SessionError(f"unknown field '{field}'")

    def update_params(self, partial: dict) -> dict:
        """Validate every field, then apply atomically."""
        if not isinstance(partial, dict):
            raise SessionError("params body must be a JSON object")
        with self._lock:
            staged = {f: self._validated(f, v) for f, v in partial.items()}
            self._state.update(staged)
            return self.get_state()

    # -- rendering -----------------------------------------------------------

    def render_png(self) -> bytes:
        with self._lock:
            state = self.get_state()
        image, _ = self.render_state(state)
        return png_bytes(image)

    def render_state(self, state: dict):
        pose = PoseState(beta=np.zeros(self.cloud.n_shape),
                         psi=np.asarray(state["expression"]),
                         theta=np.asarray(state["pose"]),
                         translation=np.asarray(state["translation"]),
                         jaw_index=self.rig.jaw_index)
        orbit = state["orbit"]
        camera = orbit_camera(orbit["azimuth"], orbit["elevation"],
                              orbit["distance"], width=self.size,
                              height=self.size)
        params = ShadeParams(f0_scale=state["f0_scale"],
                             roughness_scale=state["roughness_scale"],
                             env_yaw=state["env_yaw"],
                             exposure=state["exposure"])
        env = self.lights[state["light"]]
        return render_frame(self.cloud, self.rig, pose, camera, env, params)


def _load_lights(lights_dir) -> dict[str, EnvironmentLight]:
    out = {}
    for path in sorted(Path(lights_dir).glob("*.gslt")):
        out[path.stem] = gio.load_light(path)
    return out


def make_server(session: AvatarSession, host: str = "127.0.0.1",
                port: int = 0, static_dir=None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    static_root = Path(static_dir).resolve() if static_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # quiet by default
            pass

        def _send(self, code: int, payload: bytes, ctype: str):
            self.send_response(code)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST")
            self.end_headers()
            self.wfile.write(payload)

        def _json(self, code: int, obj):
            self._send(code, json.dumps(obj).encode(), "application/json")

        def do_OPTIONS(self):
            self._send(204, b"", "text/plain")

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/state":
                self._json(200, session.get_state())
            elif path == "/lights":
                self._json(200, {"lights": sorted(session.lights)})
            elif path == "/frame.png":
                try:
                    png = session.render_png()
                except Exception as exc:  # render failure: session survives
                    self._json(500, {"error": str(exc)})
                    return
                self._send(200, png, "image/png")
            elif static_root is not None:
                self._static(path)
            else:
                self._json(404, {"error": f"no route {path}"})

        def _static(self, path: str):
            rel = path.lstrip("/") or "index.html"
            target = (static_root / rel).resolve()
            if not str(target).startswith(str(static_root)) \
                    or not target.is_file():
                self._json(404, {"error": f"no route {path}"})
                return
            ctypes = {".html": "text/html", ".js": "text/javascript",
                      ".css": "text/css", ".png": "image/png",
                      ".map": "application/json"}
            self._send(200, target.read_bytes(),
                       ctypes.get(target.suffix, "application/octet-stream"))

        def do_POST(self):
            path = self.path.split("?", 1)[0]
            if path != "/params":
                self._json(404, {"error": f"no route {path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError as exc:
                self._json(400, {"error": f"invalid JSON: {exc}"})
                return
            try:
                state = session.update_params(body)
            except SessionError as exc:
                self._json(400, {"error": str(exc)})
                return
            self._json(200, state)

    return ThreadingHTTPServer((host, port), Handler)


def serve(avatar, rig, lights_dir, host="127.0.0.1", port=8090, size=512,
          static_dir=None) -> int:
    session = AvatarSession(gio.load_avatar(avatar), gio.load_rig(rig),
                            _load_lights(lights_dir), size=size)
    if static_dir is None:
        candidate = Path(__file__).resolve().parents[3] / "frontend" / "dist"
        static_dir = candidate if candidate.is_dir() else None
    try:
        httpd = make_server(session, host, port, static_dir)
    except OSError as exc:
        print(f"cannot bind {host}:{port}: {exc}")
        return 1
    print(f"serving avatar session on http://{host}:{httpd.server_address[1]}"
          f" ({len(session.lights)} lights"
          + (f", static {static_dir})" if static_dir else ")"))
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0
