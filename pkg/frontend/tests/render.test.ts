import { describe, expect, it } from "vitest";

import { buildScene, Viewport, weightColor } from "../src/render.js";
import type { Frame, MapDoc } from "../src/types.js";

const MAP: MapDoc = {
  meta: { row_spacing: 3, headland_depth: 5, units: "m" },
  rows: [{ row_id: 0, start: [0, 0], end: [18, 0] }],
  landmarks: [
    { id: "a", row_id: 0, pos: [0, 0], width: 0.08, kind: "tree" },
    { id: "b", row_id: 0, pos: [18, 0], width: 0.10, kind: "post" },
  ],
};

function frame(particles = 2, converged = false): Frame {
  return {
    t: 1.0,
    truth: { x: 9, y: -1.5, theta: 0 },
    estimate: { x: 9.2, y: -1.4, theta: 0.1 },
    converged,
    group_count: 2,
    particles: Array.from({ length: particles }, (_, i) => ({
      x: i, y: 0, theta: 0, weight: (i + 1) / particles,
    })),
    metrics: { final_error: 0.22, distance_traveled: 3.4 },
  };
}

describe("Viewport", () => {
  it("fit centers the map and round-trips screen/world", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    expect(view.centerX).toBeCloseTo(9);
    expect(view.centerY).toBeCloseTo(0);
    const [sx, sy] = view.toScreen(9, 0);
    expect(sx).toBeCloseTo(400);
    expect(sy).toBeCloseTo(300);
    const [wx, wy] = view.toWorld(123, 456);
    const [bx, by] = view.toScreen(wx, wy);
    expect(bx).toBeCloseTo(123);
    expect(by).toBeCloseTo(456);
  });

  it("keeps north up (larger y is higher on screen)", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    const [, yLow] = view.toScreen(9, -1);
    const [, yHigh] = view.toScreen(9, 1);
    expect(yHigh).toBeLessThan(yLow);
  });

  it("zoom anchors the cursor's world point", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    const [wx, wy] = view.toWorld(200, 150);
    view.zoom(1.5, 200, 150);
    const [sx, sy] = view.toScreen(wx, wy);
    expect(sx).toBeCloseTo(200, 6);
    expect(sy).toBeCloseTo(150, 6);
  });

  it("pan is preserved across scene rebuilds", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    const before = view.toScreen(0, 0);
    view.pan(30, -20);
    buildScene(MAP, frame(), view);
    const after = view.toScreen(0, 0);
    expect(after[0] - before[0]).toBeCloseTo(30);
    expect(after[1] - before[1]).toBeCloseTo(-20);
  });
});

describe("buildScene", () => {
  it("draws map glyphs even with no frame", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    const glyphs = buildScene(MAP, null, view);
    expect(glyphs).toHaveLength(2);
    expect(glyphs.every((g) => g.kind === "landmark")).toBe(true);
  });

  it("renders one glyph per decimated particle plus markers", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    const glyphs = buildScene(MAP, frame(500), view);
    const particles = glyphs.filter((g) => g.kind === "particle");
    expect(particles).toHaveLength(500);
    expect(glyphs.filter((g) => g.kind === "truth")).toHaveLength(1);
    expect(glyphs.filter((g) => g.kind === "estimate")).toHaveLength(1);
  });

  it("scales landmark glyphs by trunk width", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    const glyphs = buildScene(MAP, null, view);
    expect(glyphs[1].radius).toBeGreaterThan(glyphs[0].radius);
  });

  it("marks the estimate differently once converged", () => {
    const view = new Viewport(800, 600);
    view.fit(MAP);
    const before = buildScene(MAP, frame(2, false), view)
      .find((g) => g.kind === "estimate")!;
    const after = buildScene(MAP, frame(2, true), view)
      .find((g) => g.kind === "estimate")!;
    expect(before.color).not.toBe(after.color);
  });
});

describe("weightColor", () => {
  it("ramps monotonically with weight", () => {
    const low = weightColor(0.1, 1.0);
    const high = weightColor(1.0, 1.0);
    expect(low).not.toBe(high);
    expect(weightColor(0.5, 0)).toBe(weightColor(0, 1)); // degenerate max
  });
});
