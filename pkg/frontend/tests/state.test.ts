import { describe, expect, it } from "vitest";

import { parseParamInput, SessionView } from "../src/state.js";
import type { Frame, SessionState } from "../src/types.js";

function frame(t: number, error: number, groups = 3, converged = false): Frame {
  return {
    t,
    truth: { x: 1, y: 2, theta: 0 },
    estimate: { x: 1.2, y: 2.1, theta: 0.05 },
    converged,
    group_count: groups,
    particles: [{ x: 1, y: 2, theta: 0, weight: 1 }],
    metrics: { final_error: error, distance_traveled: t * 0.4 },
  };
}

function state(): SessionState {
  return {
    session_id: "s0001",
    log: "rows_00",
    mode: "gnss",
    seed: 7,
    step_index: 0,
    n_steps: 100,
    exhausted: false,
    params: { particle_count: 3000, sigma_width_w: 0.02 },
    frame: frame(0, 9.5, 40),
  };
}

describe("SessionView", () => {
  it("attaches server state and seeds the metric history", () => {
    const view = new SessionView();
    view.attach(state());
    expect(view.sessionId).toBe("s0001");
    expect(view.paramValue("particle_count")).toBe(3000);
    expect(view.history).toHaveLength(1);
    expect(view.history[0].final_error).toBe(9.5);
  });

  it("applies frames in order and mirrors metrics verbatim", () => {
    const view = new SessionView();
    view.attach(state());
    view.applyFrame(frame(0.2, 4.2, 12));
    view.applyFrame(frame(0.4, 0.3, 1, true));
    expect(view.stepIndex).toBe(2);
    expect(view.history.map((h) => h.final_error)).toEqual([9.5, 4.2, 0.3]);
    expect(view.history.map((h) => h.group_count)).toEqual([40, 12, 1]);
    expect(view.history[2].converged).toBe(true);
  });

  it("flags exhaustion at the end of the log", () => {
    const view = new SessionView();
    const s = state();
    s.n_steps = 3;
    view.attach(s);
    view.applyFrame(frame(0.2, 1));
    view.applyFrame(frame(0.4, 1));
    expect(view.exhausted).toBe(true);
  });

  it("locks a field while a patch is in flight and unlocks on ack", () => {
    const view = new SessionView();
    view.attach(state());
    view.beginEdit("sigma_width_w");
    expect(view.isLocked("sigma_width_w")).toBe(true);
    view.acknowledge({ particle_count: 3000, sigma_width_w: 0.05 });
    expect(view.isLocked("sigma_width_w")).toBe(false);
    expect(view.paramValue("sigma_width_w")).toBe(0.05);
  });

  it("keeps the old value when a patch is rejected", () => {
    const view = new SessionView();
    view.attach(state());
    view.beginEdit("sigma_width_w");
    view.rejectEdit("sigma_width_w");
    expect(view.isLocked("sigma_width_w")).toBe(false);
    expect(view.paramValue("sigma_width_w")).toBe(0.02);
  });

  it("rejects edits of unknown parameters", () => {
    const view = new SessionView();
    view.attach(state());
    expect(() => view.beginEdit("warp_factor")).toThrow();
  });

  it("reset clears the metric history", () => {
    const view = new SessionView();
    view.attach(state());
    view.applyFrame(frame(0.2, 4.2));
    view.resetTo(state());
    expect(view.history).toHaveLength(1);
    expect(view.stepIndex).toBe(0);
  });
});

describe("parseParamInput", () => {
  it("accepts plain numbers", () => {
    expect(parseParamInput("sigma_width_w", "0.03")).toBe(0.03);
  });

  it("rejects negative particle counts", () => {
    expect(() => parseParamInput("particle_count", "-5")).toThrow();
    expect(() => parseParamInput("particle_count", "2.5")).toThrow();
    expect(parseParamInput("particle_count", "500")).toBe(500);
  });

  it("rejects garbage and negative sigmas", () => {
    expect(() => parseParamInput("sigma_range_w", "abc")).toThrow();
    expect(() => parseParamInput("sigma_range_w", "-1")).toThrow();
  });
});
