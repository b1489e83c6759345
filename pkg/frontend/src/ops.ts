/**
 * Typed entry points over the CLI. Each call writes its inputs to a
 * scratch directory, runs one subcommand, and parses the output file
 * back into columns. Nothing is cached and no state crosses the process
 * boundary; the DSAT threshold schedule lives in a plain host-side
 * record (see DsatState below).
 */

import { writeFileSync, readFileSync } from "node:fs";
import { join } from "node:path";

import { BoxArray } from "./boxes.js";
import { runCli, withTempDir } from "./cli.js";
import {
  annotationsToJson,
  CurvePoint,
  detectionsToJson,
  GtBox,
  parseCurveCsv,
  parseDetectionsJson,
  parsePseudoLabelsJson,
  parseTargetSetsJson,
  PseudoLabels,
  TargetSets,
} from "./coco.js";

/** Either in-memory columns or a COCO results document as text. */
export type DetectionSource = BoxArray | { raw: string };

export interface GridSpec {
  start: number;
  stop: number;
  step: number;
}

function requireFinite(name: string, v: number): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`${name} must be a finite number, got ${v}`);
  }
  return v;
}

function detectionsText(src: DetectionSource): string {
  return "raw" in src ? src.raw : detectionsToJson(src);
}

function gridArg(grid: GridSpec): string {
  requireFinite("grid.start", grid.start);
  requireFinite("grid.stop", grid.stop);
  requireFinite("grid.step", grid.step);
  return `${grid.start}:${grid.stop}:${grid.step}`;
}

export interface NmsUncOptions {
  iouThr?: number;
  scoreThr?: number;
  /** Pick dispersion components by flat index instead of coordinate stride. */
  flatIndex?: boolean;
}

/**
 * Cluster-aware suppression. Returns the kept boxes with their
 * uncertainty and cluster-size columns; singleton clusters emit nothing.
 */
export function nmsUnc(dets: DetectionSource, opts: NmsUncOptions = {}): PseudoLabels {
  const iouThr = requireFinite("iouThr", opts.iouThr ?? 0.6);
  const scoreThr = requireFinite("scoreThr", opts.scoreThr ?? 0.4);
  return withTempDir((dir) => {
    const inPath = join(dir, "dets.json");
    const outPath = join(dir, "labels.json");
    writeFileSync(inPath, detectionsText(dets));
    const args = [
      "nms-unc",
      "--detections", inPath,
      "--iou-thr", String(iouThr),
      "--score-thr", String(scoreThr),
      "--out", outPath,
    ];
    if (opts.flatIndex) args.push("--flat-index");
    runCli(args);
    return parsePseudoLabelsJson(readFileSync(outPath, "utf8"));
  });
}

export interface StandardNmsOptions {
  iouThr?: number;
  scoreThr?: number;
}

export interface KeptDetections {
  kept: BoxArray;
  raw: string;
}

/** Plain greedy suppression; keeps the surviving detections. */
export function standardNms(
  dets: DetectionSource,
  opts: StandardNmsOptions = {},
): KeptDetections {
  const iouThr = requireFinite("iouThr", opts.iouThr ?? 0.6);
  const scoreThr = requireFinite("scoreThr", opts.scoreThr ?? 0.05);
  return withTempDir((dir) => {
    const inPath = join(dir, "dets.json");
    const outPath = join(dir, "kept.json");
    writeFileSync(inPath, detectionsText(dets));
    runCli([
      "nms",
      "--detections", inPath,
      "--iou-thr", String(iouThr),
      "--score-thr", String(scoreThr),
      "--out", outPath,
    ]);
    const raw = readFileSync(outPath, "utf8");
    return { kept: parseDetectionsJson(raw), raw };
  });
}

export interface PrCurveOptions {
  matchIou?: number;
  grid?: GridSpec;
}

export interface Curve {
  points: CurvePoint[];
  /** The CSV document verbatim, for feeding into selectThreshold. */
  csv: string;
}

/** Precision/recall/F1 over the confidence grid. */
export function prCurve(
  dets: DetectionSource,
  gts: readonly GtBox[],
  opts: PrCurveOptions = {},
): Curve {
  const matchIou = requireFinite("matchIou", opts.matchIou ?? 0.5);
  return withTempDir((dir) => {
    const detPath = join(dir, "dets.json");
    const annPath = join(dir, "ann.json");
    const outPath = join(dir, "curve.csv");
    writeFileSync(detPath, detectionsText(dets));
    writeFileSync(annPath, annotationsToJson(gts));
    const args = [
      "f1-curve",
      "--detections", detPath,
      "--annotations", annPath,
      "--match-iou", String(matchIou),
      "--out", outPath,
    ];
    if (opts.grid) args.push("--grid", gridArg(opts.grid));
    runCli(args);
    const csv = readFileSync(outPath, "utf8");
    return { points: parseCurveCsv(csv), csv };
  });
}

export interface ThresholdChoice {
  threshold: number;
  peakF1: number;
}

/** F1-peak threshold of a curve; ties go to the higher threshold. */
export function selectThreshold(curve: Curve | string): ThresholdChoice {
  const csv = typeof curve === "string" ? curve : curve.csv;
  return withTempDir((dir) => {
    const curvePath = join(dir, "curve.csv");
    writeFileSync(curvePath, csv);
    const { stdout } = runCli(["select-threshold", "--curve", curvePath]);
    const parts = stdout.trim().split(/\s+/);
    if (parts.length !== 2) {
      throw new Error(`select-threshold: expected "threshold f1", got "${stdout.trim()}"`);
    }
    const threshold = Number(parts[0]);
    const peakF1 = Number(parts[1]);
    if (!Number.isFinite(threshold) || !Number.isFinite(peakF1)) {
      throw new Error(`select-threshold: non-numeric output "${stdout.trim()}"`);
    }
    return { threshold, peakF1 };
  });
}

export interface TargetSetOptions {
  /** Score gate, or "auto" to take the F1 peak of `curve`. */
  clsThr?: number | "auto";
  uncThr?: number;
  /** Required when clsThr is "auto". */
  curve?: Curve | string;
}

/**
 * Split pseudo labels into classification targets (score at or above
 * the gate) and regression targets (uncertainty strictly below the
 * gate). The two filters are independent, so one label can land in
 * both sets, one, or neither.
 */
export function buildTargetSets(
  labels: PseudoLabels | string,
  opts: TargetSetOptions = {},
): TargetSets {
  const clsThr = opts.clsThr ?? 0.5;
  if (typeof clsThr === "number") requireFinite("clsThr", clsThr);
  else if (clsThr !== "auto") {
    throw new Error(`clsThr must be a number or "auto", got ${JSON.stringify(clsThr)}`);
  }
  const uncThr = requireFinite("uncThr", opts.uncThr ?? 0.08);
  if (clsThr === "auto" && opts.curve === undefined) {
    throw new Error('clsThr "auto" needs a curve to take the F1 peak from');
  }
  const labelsText = typeof labels === "string" ? labels : labels.raw;
  return withTempDir((dir) => {
    const labelsPath = join(dir, "labels.json");
    const outPath = join(dir, "targets.json");
    writeFileSync(labelsPath, labelsText);
    const args = [
      "filter",
      "--pseudo", labelsPath,
      "--cls-thr", String(clsThr),
      "--unc-thr", String(uncThr),
      "--out", outPath,
    ];
    if (opts.curve !== undefined) {
      const curvePath = join(dir, "curve.csv");
      writeFileSync(curvePath, typeof opts.curve === "string" ? opts.curve : opts.curve.csv);
      args.push("--curve", curvePath);
    }
    runCli(args);
    return parseTargetSetsJson(readFileSync(outPath, "utf8"));
  });
}

/**
 * Exponential moving average over flat parameter vectors, computed in
 * process: teacher * rate + student * (1 - rate) per element. This is
 * plain arithmetic on the caller's own arrays, so it does not round-trip
 * through the CLI.
 */
export function emaUpdate(
  teacher: ArrayLike<number>,
  student: ArrayLike<number>,
  rate = 0.999,
): Float64Array {
  if (!Number.isFinite(rate) || rate < 0 || rate > 1) {
    throw new Error(`rate ${rate} outside [0, 1]`);
  }
  if (teacher.length !== student.length) {
    throw new Error(
      `teacher has ${teacher.length} parameters, student has ${student.length}`,
    );
  }
  const out = new Float64Array(teacher.length);
  for (let i = 0; i < teacher.length; i++) {
    const t = teacher[i]!;
    const s = student[i]!;
    if (!Number.isFinite(t) || !Number.isFinite(s)) {
      throw new Error(`parameter ${i} is not finite (teacher=${t}, student=${s})`);
    }
    out[i] = t * rate + s * (1 - rate);
  }
  return out;
}

export interface DsatUpdate {
  iteration: number;
  threshold: number;
  peakF1: number;
}

/**
 * Threshold-schedule state as a plain record. Callers own it; the
 * update helper below never mutates its argument and returns either the
 * same record (off cadence, stale, or non-adaptive) or a fresh one.
 */
export interface DsatState {
  sigmaCls: number;
  updatePeriodIters: number;
  matchIou: number;
  grid?: GridSpec;
  history: readonly DsatUpdate[];
  adaptive: boolean;
}

export function defaultDsatState(): DsatState {
  return {
    sigmaCls: 0.5,
    updatePeriodIters: 4000,
    matchIou: 0.5,
    history: [],
    adaptive: true,
  };
}

/**
 * Re-pick the score gate from held-out detections when the iteration is
 * on cadence. Iterations already covered by history are ignored, so
 * replayed steps are no-ops.
 */
export function dsatMaybeUpdate(
  state: DsatState,
  iteration: number,
  dets: DetectionSource,
  gts: readonly GtBox[],
): DsatState {
  if (!Number.isInteger(iteration) || iteration < 0) {
    throw new Error(`iteration must be a non-negative integer, got ${iteration}`);
  }
  if (!state.adaptive) return state;
  if (iteration % state.updatePeriodIters !== 0) return state;
  const last = state.history[state.history.length - 1];
  if (last && iteration <= last.iteration) return state;
  const curveOpts: PrCurveOptions = { matchIou: state.matchIou };
  if (state.grid) curveOpts.grid = state.grid;
  const curve = prCurve(dets, gts, curveOpts);
  const { threshold, peakF1 } = selectThreshold(curve);
  return {
    ...state,
    sigmaCls: threshold,
    history: [...state.history, { iteration, threshold, peakF1 }],
  };
}
