/**
 * Column-oriented detection storage.
 *
 * Boxes are kept as a flat Float64Array of corner coordinates
 * (x1, y1, x2, y2 per row) with parallel columns for score, class,
 * image and optional centerness. All marshalling to and from the
 * wire formats goes through this shape.
 */

export interface BoxArray {
  /** Row-major corner coordinates, length 4 * n. */
  coords: Float64Array;
  /** Classification score per row, each in [0, 1]. */
  score: Float64Array;
  classId: Int32Array;
  imageId: Int32Array;
  /** Optional quality column, each in [0, 1] when present. */
  centerness: Float64Array | null;
}

export interface BoxRow {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  score: number;
  classId?: number;
  imageId?: number;
  centerness?: number;
}

export function boxCount(boxes: BoxArray): number {
  return boxes.score.length;
}

export function emptyBoxArray(): BoxArray {
  return {
    coords: new Float64Array(0),
    score: new Float64Array(0),
    classId: new Int32Array(0),
    imageId: new Int32Array(0),
    centerness: null,
  };
}

/**
 * Build a BoxArray from row objects. Rows with no centerness leave the
 * column null; mixing rows with and without centerness is rejected
 * because the wire format folds centerness into the score and a partial
 * column would silently change meaning per row.
 */
export function boxArrayFromRows(rows: readonly BoxRow[]): BoxArray {
  const n = rows.length;
  if (n === 0) return emptyBoxArray();
  const withCenterness = rows.filter((r) => r.centerness !== undefined).length;
  if (withCenterness !== 0 && withCenterness !== n) {
    throw new Error(
      `centerness set on ${withCenterness} of ${n} rows; it must be set on all rows or none`,
    );
  }
  const out: BoxArray = {
    coords: new Float64Array(4 * n),
    score: new Float64Array(n),
    classId: new Int32Array(n),
    imageId: new Int32Array(n),
    centerness: withCenterness ? new Float64Array(n) : null,
  };
  for (let i = 0; i < n; i++) {
    const r = rows[i]!;
    out.coords[4 * i] = r.x1;
    out.coords[4 * i + 1] = r.y1;
    out.coords[4 * i + 2] = r.x2;
    out.coords[4 * i + 3] = r.y2;
    out.score[i] = r.score;
    out.classId[i] = r.classId ?? 0;
    out.imageId[i] = r.imageId ?? 0;
    if (out.centerness) out.centerness[i] = r.centerness!;
  }
  validateBoxArray(out);
  return out;
}

export function rowAt(boxes: BoxArray, i: number): BoxRow {
  const n = boxCount(boxes);
  if (!Number.isInteger(i) || i < 0 || i >= n) {
    throw new Error(`row index ${i} out of range for ${n} boxes`);
  }
  const row: BoxRow = {
    x1: boxes.coords[4 * i]!,
    y1: boxes.coords[4 * i + 1]!,
    x2: boxes.coords[4 * i + 2]!,
    y2: boxes.coords[4 * i + 3]!,
    score: boxes.score[i]!,
    classId: boxes.classId[i]!,
    imageId: boxes.imageId[i]!,
  };
  if (boxes.centerness) row.centerness = boxes.centerness[i]!;
  return row;
}

/**
 * Check column lengths and per-row invariants. Throws on the first
 * violation, naming the offending row. The rules match what the
 * backend enforces when it parses a detections file, so a BoxArray
 * that passes here will be accepted on the other side.
 */
export function validateBoxArray(boxes: BoxArray): void {
  const n = boxes.score.length;
  if (boxes.coords.length !== 4 * n) {
    throw new Error(
      `coords length ${boxes.coords.length} does not match ${n} scores (expected ${4 * n})`,
    );
  }
  for (const [name, col] of [
    ["classId", boxes.classId],
    ["imageId", boxes.imageId],
  ] as const) {
    if (col.length !== n) {
      throw new Error(`${name} length ${col.length} does not match ${n} scores`);
    }
  }
  if (boxes.centerness && boxes.centerness.length !== n) {
    throw new Error(
      `centerness length ${boxes.centerness.length} does not match ${n} scores`,
    );
  }
  for (let i = 0; i < n; i++) {
    const x1 = boxes.coords[4 * i]!;
    const y1 = boxes.coords[4 * i + 1]!;
    const x2 = boxes.coords[4 * i + 2]!;
    const y2 = boxes.coords[4 * i + 3]!;
    if (
      !Number.isFinite(x1) ||
      !Number.isFinite(y1) ||
      !Number.isFinite(x2) ||
      !Number.isFinite(y2)
    ) {
      throw new Error(`box ${i}: coordinates must be finite`);
    }
    if (x2 < x1 || y2 < y1) {
      throw new Error(
        `box ${i}: corners out of order (x1=${x1}, y1=${y1}, x2=${x2}, y2=${y2})`,
      );
    }
    const s = boxes.score[i]!;
    if (!Number.isFinite(s) || s < 0 || s > 1) {
      throw new Error(`box ${i}: score ${s} outside [0, 1]`);
    }
    if (boxes.centerness) {
      const c = boxes.centerness[i]!;
      if (!Number.isFinite(c) || c < 0 || c > 1) {
        throw new Error(`box ${i}: centerness ${c} outside [0, 1]`);
      }
    }
  }
}
