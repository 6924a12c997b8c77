"""Live replay sessions over HTTP for interactive filter tuning.

A session pins one simulated log and one filter configuration. The client
steps it, watches streamed particle frames, patches tunable parameters
(taking effect on subsequent frames), and resets to the large-area,
small-area, or cluster initializations.

All payloads are JSON; streamed frames are newline-delimited JSON objects.
"""

from __future__ import annotations

import itertools
import json
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from .config import PARAM_FIELDS, Params, params_from_dict
from .evaluate import (HEADING_HALFWIDTH, LARGE_AREA_SIDE, SMALL_AREA_SIDE,
                       FilterReplay)
from .geom import Vec2
from .motion import MODES, default_noise
from .orchard import load_map
from .particle_filter import (group_particles, init_area, init_cluster,
                              systematic_resample)
from .sensing import SensorConfig
from .simulate import SimLog, derive_seed, read_log

DEFAULT_PARTICLE_CAP = 2000


class Session:
    """One live filter replay with patchable parameters."""

    def __init__(self, session_id: str, log_name: str, log: SimLog, omap,
                 params: Params, mode: str, seed: int,
                 particle_cap: int = DEFAULT_PARTICLE_CAP):
        self.id = session_id
        self.log_name = log_name
        self.log = log
        self.omap = omap
        self.params = params
        self.mode = mode
        self.seed = int(seed)
        self.particle_cap = int(particle_cap)
        self.lock = threading.Lock()
        self._frame_counter = 0
        self.reset({"init": "area", "side": LARGE_AREA_SIDE})

    def _make_replay(self, start_step: int) -> FilterReplay:
        noise = self.params.motion_noise or default_noise(self.mode)
        rng = np.random.default_rng(
            np.random.SeedSequence([0x5E55, self.seed]))
        cfg = self.params.sensor_config(SensorConfig())
        return FilterReplay(self.log, self.omap, cfg,
                            self.params.filter_params, self.mode, noise, rng,
                            start_step)

    def reset(self, body: dict) -> None:
        init = body.get("init", "area")
        start_step = int(body.get("start_step", 0))
        replay = self._make_replay(start_step)
        n = self.params.filter_params.particle_count
        truth = self.log.truth_pose(start_step)
        if init == "area":
            side = float(body.get("side", LARGE_AREA_SIDE))
            center = Vec2(truth.x, truth.y)
            replay.pset = init_area(center, side, truth.theta,
                                    HEADING_HALFWIDTH, n, replay.rng)
        elif init == "cluster":
            pos_sigma = float(body.get("pos_sigma", 0.3))
            heading_sigma = float(body.get("heading_sigma", 0.03))
            replay.pset = init_cluster(truth, pos_sigma, heading_sigma, n,
                                       replay.rng)
        else:
            raise HTTPException(400, f"unknown init {init!r}")
        self.replay = replay

    def patch(self, body: dict) -> dict:
        unknown = set(body) - set(PARAM_FIELDS)
        if unknown:
            raise HTTPException(400, f"unknown parameter fields: {sorted(unknown)}")
        merged = self.params.to_dict()
        merged.update(body)
        try:
            new_params = params_from_dict(merged)
            cfg = new_params.sensor_config(SensorConfig())
        except (ValueError, TypeError) as e:
            raise HTTPException(400, str(e))
        old_n = self.params.filter_params.particle_count
        self.params = new_params
        rep = self.replay
        rep.fparams = new_params.filter_params
        rep.cfg = cfg
        rep.noise = new_params.motion_noise or default_noise(self.mode)
        new_n = new_params.filter_params.particle_count
        if new_n != old_n and rep.pset is not None:
            ps = rep.pset
            w = ps.weights / ps.weights.sum()
            idx = systematic_resample(w, new_n, rep.rng)
            from .particle_filter import ParticleSet
            rep.pset = ParticleSet(ps.xs[idx], ps.ys[idx], ps.thetas[idx],
                                   np.full(new_n, 1.0 / new_n), normalized=True)
        return self.params.to_dict()

    def frame(self, particle_cap: int | None = None) -> dict:
        rep = self.replay
        ps = rep.pset
        est = rep.estimate()
        truth = rep.truth()
        report = group_particles(ps, rep.fparams)
        cap = self.particle_cap if particle_cap is None else int(particle_cap)
        idx = np.arange(ps.n)
        weights = ps.weights
        if ps.n > cap:
            rng = np.random.default_rng(np.random.SeedSequence(
                [0xF7A3, self.seed, self._frame_counter]))
            idx = systematic_resample(weights / weights.sum(), cap, rng)
            weights = np.full(cap, weights.sum() / cap)
        self._frame_counter += 1
        return {
            "t": float(self.log.t[rep.step_index]),
            "truth": {"x": truth.x, "y": truth.y, "theta": truth.theta},
            "estimate": {"x": est.x, "y": est.y, "theta": est.theta},
            "converged": bool(rep.converged()),
            "group_count": report.group_count,
            "particles": [
                {"x": float(ps.xs[i]), "y": float(ps.ys[i]),
                 "theta": float(ps.thetas[i]), "weight": float(w)}
                for i, w in zip(idx, weights)
            ],
            "metrics": {"final_error": float(rep.error()),
                        "distance_traveled": float(rep.distance_traveled())},
        }

    def state(self) -> dict:
        return {
            "session_id": self.id,
            "log": self.log_name,
            "mode": self.mode,
            "seed": self.seed,
            "step_index": self.replay.step_index,
            "n_steps": self.log.n_steps,
            "exhausted": self.replay.exhausted,
            "params": self.params.to_dict(),
            "frame": self.frame(),
        }


def create_app(map_path, logs_dir, base_params: Params | None = None,
               ui_dir=None) -> FastAPI:
    omap = load_map(map_path)
    logs_dir = Path(logs_dir)
    base_params = base_params or Params()

    app = FastAPI(title="orchardloc session server")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)
    log_cache: dict[str, SimLog] = {}

    def _get_session(session_id: str) -> Session:
        try:
            return sessions[session_id]
        except KeyError:
            raise HTTPException(404, f"no session {session_id!r}")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/map")
    def get_map():
        from .orchard import map_to_dict
        return map_to_dict(omap)

    @app.get("/logs")
    def list_logs():
        out = []
        for path in sorted(logs_dir.glob("*.jsonl")):
            name = path.stem
            if name not in log_cache:
                log_cache[name] = read_log(path)
            log = log_cache[name]
            out.append({"name": name, "kind": log.spec.kind,
                        "steps": log.n_steps,
                        "duration": float(log.t[-1]) if log.n_steps else 0.0})
        return {"logs": out}

    @app.post("/sessions")
    def create_session(body: dict):
        name = body.get("log")
        if not name:
            raise HTTPException(400, "missing 'log'")
        path = logs_dir / f"{name}.jsonl"
        if not path.exists():
            raise HTTPException(404, f"no log {name!r}")
        if name not in log_cache:
            log_cache[name] = read_log(path)
        mode = body.get("mode", "gnss")
        if mode not in MODES:
            raise HTTPException(400, f"unknown mode {mode!r}")
        params = base_params
        if body.get("params"):
            merged = base_params.to_dict()
            merged.update(body["params"])
            try:
                params = params_from_dict(merged)
            except (ValueError, TypeError) as e:
                raise HTTPException(400, str(e))
        seed = int(body.get("seed", derive_seed(2741, len(sessions))))
        session_id = f"s{next(counter):04d}"
        sessions[session_id] = Session(
            session_id, name, log_cache[name], omap, params, mode, seed,
            int(body.get("particle_cap", DEFAULT_PARTICLE_CAP)))
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        session = _get_session(session_id)
        with session.lock:
            return session.state()

    @app.patch("/sessions/{session_id}/params")
    def patch_params(session_id: str, body: dict):
        session = _get_session(session_id)
        with session.lock:
            return {"params": session.patch(body)}

    @app.post("/sessions/{session_id}/reset")
    def reset_session(session_id: str, body: dict):
        session = _get_session(session_id)
        with session.lock:
            session.reset(body or {})
            return session.state()

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str, body: dict):
        session = _get_session(session_id)
        n_steps = int(body.get("n_steps", 1))
        cap = body.get("particle_cap")

        def frames():
            with session.lock:
                for _ in range(max(0, n_steps)):
                    if not session.replay.advance():
                        break
                    yield json.dumps(session.frame(cap),
                                     separators=(",", ":")) + "\n"

        return StreamingResponse(frames(), media_type="application/x-ndjson")

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")
    return app
