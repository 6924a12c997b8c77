import type { Frame, ParamValues, SessionState } from "./types.js";

export interface MetricPoint {
  t: number;
  final_error: number;
  distance_traveled: number;
  group_count: number;
  converged: boolean;
}

export interface FieldState {
  value: number;
  pending: boolean; // a patch is in flight; the field is locked until acked
}

/** Client-side view of one live session.
 *
 * Frames are applied in arrival order; the metric history mirrors the
 * server-reported metrics verbatim. The parameter form always reflects the
 * server's last acknowledged values, with in-flight fields locked.
 */
export class SessionView {
  sessionId = "";
  log = "";
  mode = "";
  nSteps = 0;
  stepIndex = 0;
  exhausted = false;
  frame: Frame | null = null;
  history: MetricPoint[] = [];
  fields = new Map<string, FieldState>();

  attach(state: SessionState): void {
    this.sessionId = state.session_id;
    this.log = state.log;
    this.mode = state.mode;
    this.nSteps = state.n_steps;
    this.stepIndex = state.step_index;
    this.exhausted = state.exhausted;
    this.fields = new Map(
      Object.entries(state.params).map(([k, v]) => [k, { value: v, pending: false }]),
    );
    this.frame = state.frame;
    this.history = [];
    this.recordMetrics(state.frame);
  }

  applyFrame(frame: Frame): void {
    this.frame = frame;
    this.stepIndex += 1;
    this.exhausted = this.stepIndex + 1 >= this.nSteps;
    this.recordMetrics(frame);
  }

  resetTo(state: SessionState): void {
    this.stepIndex = state.step_index;
    this.exhausted = state.exhausted;
    this.frame = state.frame;
    this.history = [];
    this.recordMetrics(state.frame);
  }

  private recordMetrics(frame: Frame): void {
    this.history.push({
      t: frame.t,
      final_error: frame.metrics.final_error,
      distance_traveled: frame.metrics.distance_traveled,
      group_count: frame.group_count,
      converged: frame.converged,
    });
  }

  /** Mark a field as having an un-acknowledged patch in flight. */
  beginEdit(name: string): void {
    const field = this.fields.get(name);
    if (!field) throw new Error(`unknown parameter ${name}`);
    field.pending = true;
  }

  /** Apply the server's acknowledged values; unlocks every field. */
  acknowledge(params: ParamValues): void {
    this.fields = new Map(
      Object.entries(params).map(([k, v]) => [k, { value: v, pending: false }]),
    );
  }

  /** A rejected patch leaves values untouched but unlocks the field. */
  rejectEdit(name: string): void {
    const field = this.fields.get(name);
    if (field) field.pending = false;
  }

  isLocked(name: string): boolean {
    return this.fields.get(name)?.pending ?? false;
  }

  paramValue(name: string): number | undefined {
    return this.fields.get(name)?.value;
  }
}

/** Validate a raw form string for a parameter before sending it. */
export function parseParamInput(name: string, raw: string): number {
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new Error(`${name}: not a number`);
  }
  if (name === "particle_count") {
    if (!Number.isInteger(value) || value < 2) {
      throw new Error("particle_count must be an integer >= 2");
    }
    return value;
  }
  if (value < 0) {
    throw new Error(`${name} must be >= 0`);
  }
  return value;
}
