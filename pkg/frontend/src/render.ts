import type { Frame, MapDoc } from "./types.js";

/** World-to-screen mapping with pan/zoom that survives frame updates. */
export class Viewport {
  scale = 10; // pixels per meter
  centerX = 0; // world meters at the canvas center
  centerY = 0;

  constructor(
    public width: number,
    public height: number,
  ) {}

  fit(map: MapDoc, margin = 5): void {
    const xs = map.landmarks.map((l) => l.pos[0]);
    const ys = map.landmarks.map((l) => l.pos[1]);
    const minX = Math.min(...xs) - margin;
    const maxX = Math.max(...xs) + margin;
    const minY = Math.min(...ys) - margin;
    const maxY = Math.max(...ys) + margin;
    this.centerX = (minX + maxX) / 2;
    this.centerY = (minY + maxY) / 2;
    this.scale = Math.min(this.width / (maxX - minX), this.height / (maxY - minY));
  }

  toScreen(x: number, y: number): [number, number] {
    return [
      this.width / 2 + (x - this.centerX) * this.scale,
      this.height / 2 - (y - this.centerY) * this.scale, // north up
    ];
  }

  pan(dxPixels: number, dyPixels: number): void {
    this.centerX -= dxPixels / this.scale;
    this.centerY += dyPixels / this.scale;
  }

  zoom(factor: number, atX?: number, atY?: number): void {
    const next = Math.min(400, Math.max(1, this.scale * factor));
    if (atX !== undefined && atY !== undefined) {
      // keep the world point under the cursor fixed
      const [wx, wy] = this.toWorld(atX, atY);
      this.scale = next;
      const [sx, sy] = this.toScreen(wx, wy);
      this.pan(atX - sx, atY - sy);
    } else {
      this.scale = next;
    }
  }

  toWorld(px: number, py: number): [number, number] {
    return [
      this.centerX + (px - this.width / 2) / this.scale,
      this.centerY - (py - this.height / 2) / this.scale,
    ];
  }
}

export interface Glyph {
  kind: "landmark" | "particle" | "truth" | "estimate";
  x: number; // screen px
  y: number;
  radius: number;
  color: string;
  heading?: number; // radians, for oriented markers
}

/** Map particle weights onto a blue-to-yellow ramp (relative to the frame's
 * own maximum, so the leading hypotheses always stand out). */
export function weightColor(weight: number, maxWeight: number): string {
  const t = maxWeight > 0 ? Math.min(1, weight / maxWeight) : 0;
  const r = Math.round(40 + 215 * t);
  const g = Math.round(60 + 170 * t);
  const b = Math.round(160 - 120 * t);
  return `rgb(${r},${g},${b})`;
}

/** Pure scene builder: everything the painter needs, no canvas required. */
export function buildScene(map: MapDoc | null, frame: Frame | null,
                           view: Viewport): Glyph[] {
  const glyphs: Glyph[] = [];
  if (map) {
    for (const lm of map.landmarks) {
      const [x, y] = view.toScreen(lm.pos[0], lm.pos[1]);
      glyphs.push({
        kind: "landmark",
        x,
        y,
        radius: Math.max(1.2, (lm.width * view.scale) / 2) * 4,
        color: lm.kind === "post" ? "#8c8c8c" : "#7a4f23",
      });
    }
  }
  if (frame) {
    const maxW = frame.particles.reduce((m, p) => Math.max(m, p.weight), 0);
    for (const p of frame.particles) {
      const [x, y] = view.toScreen(p.x, p.y);
      glyphs.push({
        kind: "particle",
        x,
        y,
        radius: 1.6,
        color: weightColor(p.weight, maxW),
        heading: p.theta,
      });
    }
    const [tx, ty] = view.toScreen(frame.truth.x, frame.truth.y);
    glyphs.push({ kind: "truth", x: tx, y: ty, radius: 7, color: "#1f6fd6",
                  heading: frame.truth.theta });
    const [ex, ey] = view.toScreen(frame.estimate.x, frame.estimate.y);
    glyphs.push({ kind: "estimate", x: ex, y: ey, radius: 6,
                  color: frame.converged ? "#14a044" : "#d6551f",
                  heading: frame.estimate.theta });
  }
  return glyphs;
}

/** Thin painter: walks the glyph list onto a 2D context. */
export function paintScene(ctx: CanvasRenderingContext2D, glyphs: Glyph[],
                           width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#f6f4ef";
  ctx.fillRect(0, 0, width, height);
  for (const g of glyphs) {
    ctx.beginPath();
    if (g.kind === "truth") {
      ctx.fillStyle = g.color;
      ctx.arc(g.x, g.y, g.radius, 0, Math.PI * 2);
      ctx.fill();
    } else if (g.kind === "estimate") {
      ctx.strokeStyle = g.color;
      ctx.lineWidth = 2.5;
      ctx.arc(g.x, g.y, g.radius, 0, Math.PI * 2);
      ctx.stroke();
    } else {
      ctx.fillStyle = g.color;
      ctx.arc(g.x, g.y, g.radius, 0, Math.PI * 2);
      ctx.fill();
    }
    if (g.heading !== undefined && g.kind !== "particle") {
      ctx.strokeStyle = g.color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(g.x, g.y);
      ctx.lineTo(g.x + Math.cos(g.heading) * g.radius * 2,
                 g.y - Math.sin(g.heading) * g.radius * 2);
      ctx.stroke();
    }
  }
}
