/**
 * Readers and writers for the wire formats the CLI speaks: COCO results
 * arrays, COCO annotation files, pseudo-label arrays (results plus
 * uncertainty and cluster_size), target-set documents and curve CSV.
 *
 * Boxes cross the wire in xywh form. Widths are chosen so that x + w
 * reproduces the right edge bit-exactly on the parsing side; both ends
 * of the pipe do the same plain float64 addition, so corner coordinates
 * survive a round trip unchanged.
 */

import {
  BoxArray,
  boxArrayFromRows,
  boxCount,
  BoxRow,
  emptyBoxArray,
  validateBoxArray,
} from "./boxes.js";

export interface GtBox {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  classId?: number;
  imageId?: number;
}

export interface PseudoLabels {
  /** Surviving boxes; the score column holds the label scores. */
  kept: BoxArray;
  /** Corner dispersion per kept box, parallel to `kept`. */
  uncertainty: Float64Array;
  /** Number of pooled boxes per kept box, always >= 2. */
  clusterSize: Int32Array;
  /** The file content verbatim, for feeding into downstream commands. */
  raw: string;
}

export interface CurvePoint {
  threshold: number;
  precision: number;
  recall: number;
  f1: number;
  tp: number;
  fp: number;
  nGt: number;
}

export const CURVE_CSV_HEADER = "threshold,precision,recall,f1,tp,fp,n_gt";

const F64 = new Float64Array(1);
const U64 = new BigUint64Array(F64.buffer);

function nextafter(x: number, up: boolean): number {
  if (x === 0) return up ? Number.MIN_VALUE : -Number.MIN_VALUE;
  F64[0] = x;
  // stepping away from zero increments the payload, toward zero decrements
  const awayFromZero = x > 0 === up;
  U64[0] = U64[0]! + (awayFromZero ? 1n : -1n);
  return F64[0]!;
}

/** Smallest-effort float w such that lo + w rounds to exactly hi. */
export function exactExtent(lo: number, hi: number): number {
  let w = hi - lo;
  if (lo + w === hi) return w;
  // monotone in w, and the initial subtraction is within half an ulp,
  // so a short walk either lands on the target or overshoots it
  const up = lo + w < hi;
  for (let k = 0; k < 64; k++) {
    w = nextafter(w, up);
    const s = lo + w;
    if (s === hi) return w;
    if (up !== s < hi) break;
  }
  throw new Error(`extent from ${lo} to ${hi} has no exact (x, w) encoding`);
}

export function cornersToXywh(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
): [number, number, number, number] {
  return [x1, y1, exactExtent(x1, x2), exactExtent(y1, y2)];
}

function bboxField(rec: Record<string, unknown>, where: string): [number, number, number, number] {
  const raw = rec["bbox"];
  if (!Array.isArray(raw) || raw.length !== 4 || raw.some((v) => typeof v !== "number")) {
    throw new Error(`${where}: field "bbox" must be [x, y, w, h]`);
  }
  return raw as [number, number, number, number];
}

function numField(rec: Record<string, unknown>, key: string, where: string): number {
  const v = rec[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`${where}: field "${key}" missing or not a finite number`);
  }
  return v;
}

function intField(rec: Record<string, unknown>, key: string, where: string): number {
  const v = rec[key];
  if (typeof v !== "number" || !Number.isInteger(v)) {
    throw new Error(`${where}: field "${key}" missing or not an integer`);
  }
  return v;
}

function recordsOf(text: string, name: string): Record<string, unknown>[] {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new Error(`${name}: invalid JSON (${(e as Error).message})`);
  }
  if (!Array.isArray(doc)) throw new Error(`${name}: top level must be a JSON array`);
  doc.forEach((rec, i) => {
    if (typeof rec !== "object" || rec === null || Array.isArray(rec)) {
      throw new Error(`${name}[${i}]: must be a JSON object`);
    }
  });
  return doc as Record<string, unknown>[];
}

/** Serialize a BoxArray as a COCO results array. */
export function detectionsToJson(boxes: BoxArray): string {
  validateBoxArray(boxes);
  const records = [];
  for (let i = 0; i < boxCount(boxes); i++) {
    const rec: Record<string, unknown> = {
      image_id: boxes.imageId[i],
      category_id: boxes.classId[i],
      bbox: cornersToXywh(
        boxes.coords[4 * i]!,
        boxes.coords[4 * i + 1]!,
        boxes.coords[4 * i + 2]!,
        boxes.coords[4 * i + 3]!,
      ),
      score: boxes.score[i],
    };
    if (boxes.centerness) rec["centerness"] = boxes.centerness[i];
    records.push(rec);
  }
  return JSON.stringify(records);
}

/**
 * Parse a COCO results array. Records carrying a centerness field hold a
 * raw score; the two are folded into one final score here, exactly as
 * the backend folds them on load, so the returned array never has a
 * centerness column.
 */
export function parseDetectionsJson(text: string): BoxArray {
  const records = recordsOf(text, "detections");
  const rows: BoxRow[] = records.map((rec, i) => {
    const where = `detections[${i}]`;
    const [x, y, w, h] = bboxField(rec, where);
    let score = numField(rec, "score", where);
    if (rec["centerness"] !== undefined) {
      score = score * numField(rec, "centerness", where);
    }
    return {
      x1: x,
      y1: y,
      x2: x + w,
      y2: y + h,
      score,
      classId: intField(rec, "category_id", where),
      imageId: intField(rec, "image_id", where),
    };
  });
  return boxArrayFromRows(rows);
}

export function parsePseudoLabelsJson(text: string): PseudoLabels {
  const records = recordsOf(text, "labels");
  const n = records.length;
  const uncertainty = new Float64Array(n);
  const clusterSize = new Int32Array(n);
  const rows: BoxRow[] = records.map((rec, i) => {
    const where = `labels[${i}]`;
    const [x, y, w, h] = bboxField(rec, where);
    uncertainty[i] = numField(rec, "uncertainty", where);
    const size = intField(rec, "cluster_size", where);
    if (size < 2) throw new Error(`${where}: cluster_size ${size} below 2`);
    clusterSize[i] = size;
    return {
      x1: x,
      y1: y,
      x2: x + w,
      y2: y + h,
      score: numField(rec, "score", where),
      classId: intField(rec, "category_id", where),
      imageId: intField(rec, "image_id", where),
    };
  });
  return {
    kept: n ? boxArrayFromRows(rows) : emptyBoxArray(),
    uncertainty,
    clusterSize,
    raw: text,
  };
}

/**
 * Serialize ground-truth boxes as a COCO annotation file. The images and
 * categories lists are synthesized from the ids present, which is all
 * the consumer checks referentially.
 */
export function annotationsToJson(gts: readonly GtBox[]): string {
  const imageIds = new Set<number>();
  const categoryIds = new Set<number>();
  const annotations = gts.map((g, i) => {
    if (![g.x1, g.y1, g.x2, g.y2].every(Number.isFinite)) {
      throw new Error(`ground truth ${i}: coordinates must be finite`);
    }
    if (g.x2 <= g.x1 || g.y2 <= g.y1) {
      throw new Error(
        `ground truth ${i}: box must have positive extent (x1=${g.x1}, y1=${g.y1}, x2=${g.x2}, y2=${g.y2})`,
      );
    }
    const classId = g.classId ?? 0;
    const imageId = g.imageId ?? 0;
    if (!Number.isInteger(classId) || !Number.isInteger(imageId)) {
      throw new Error(`ground truth ${i}: classId and imageId must be integers`);
    }
    imageIds.add(imageId);
    categoryIds.add(classId);
    return {
      id: i + 1,
      image_id: imageId,
      category_id: classId,
      bbox: cornersToXywh(g.x1, g.y1, g.x2, g.y2),
    };
  });
  return JSON.stringify({
    images: [...imageIds].sort((a, b) => a - b).map((id) => ({ id })),
    categories: [...categoryIds].sort((a, b) => a - b).map((id) => ({ id })),
    annotations,
  });
}

export function parseCurveCsv(text: string): CurvePoint[] {
  const lines = text.split("\n");
  if (lines.length && lines[lines.length - 1] === "") lines.pop();
  if (lines.length === 0 || lines[0] !== CURVE_CSV_HEADER) {
    throw new Error(
      `curve CSV: expected header "${CURVE_CSV_HEADER}", got "${lines[0] ?? ""}"`,
    );
  }
  return lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== 7) {
      throw new Error(`curve CSV row ${i + 1}: expected 7 columns, got ${cells.length}`);
    }
    const nums = cells.map((c) => Number(c));
    if (nums.some((v) => !Number.isFinite(v))) {
      throw new Error(`curve CSV row ${i + 1}: non-numeric cell in "${line}"`);
    }
    const [threshold, precision, recall, f1, tp, fp, nGt] = nums as [
      number, number, number, number, number, number, number,
    ];
    if (![tp, fp, nGt].every(Number.isInteger)) {
      throw new Error(`curve CSV row ${i + 1}: counts must be integers in "${line}"`);
    }
    return { threshold, precision, recall, f1, tp, fp, nGt };
  });
}

export interface TargetSets {
  sigmaCls: number;
  sigmaUnc: number;
  clsTargets: PseudoLabels;
  regTargets: PseudoLabels;
  raw: string;
}

export function parseTargetSetsJson(text: string): TargetSets {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new Error(`target sets: invalid JSON (${(e as Error).message})`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("target sets: top level must be a JSON object");
  }
  const rec = doc as Record<string, unknown>;
  const sigmaCls = numField(rec, "sigma_cls", "target sets");
  const sigmaUnc = numField(rec, "sigma_unc", "target sets");
  const sets: Record<string, PseudoLabels> = {};
  for (const key of ["cls_targets", "reg_targets"]) {
    if (!Array.isArray(rec[key])) {
      throw new Error(`target sets: missing top-level list "${key}"`);
    }
    sets[key] = parsePseudoLabelsJson(JSON.stringify(rec[key]));
  }
  return {
    sigmaCls,
    sigmaUnc,
    clsTargets: sets["cls_targets"]!,
    regTargets: sets["reg_targets"]!,
    raw: text,
  };
}
