export interface Pose {
  x: number;
  y: number;
  theta: number;
}

export interface ParticleDot {
  x: number;
  y: number;
  theta: number;
  weight: number;
}

export interface Metrics {
  final_error: number;
  distance_traveled: number;
}

export interface Frame {
  t: number;
  truth: Pose;
  estimate: Pose;
  converged: boolean;
  group_count: number;
  particles: ParticleDot[];
  metrics: Metrics;
}

export interface LogInfo {
  name: string;
  kind: string;
  steps: number;
  duration: number;
}

export type ParamValues = Record<string, number>;

export interface SessionState {
  session_id: string;
  log: string;
  mode: string;
  seed: number;
  step_index: number;
  n_steps: number;
  exhausted: boolean;
  params: ParamValues;
  frame: Frame;
}

export interface MapLandmark {
  id: string;
  row_id: number;
  pos: [number, number];
  width: number;
  kind: string;
}

export interface MapDoc {
  meta: { row_spacing: number; headland_depth: number; units: string };
  rows: { row_id: number; start: [number, number]; end: [number, number] }[];
  landmarks: MapLandmark[];
}
