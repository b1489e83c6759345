import { describe, expect, it } from "vitest";

import {
  boxArrayFromRows,
  boxCount,
  emptyBoxArray,
  rowAt,
  validateBoxArray,
} from "../src/boxes";
import {
  annotationsToJson,
  CURVE_CSV_HEADER,
  cornersToXywh,
  detectionsToJson,
  exactExtent,
  parseCurveCsv,
  parseDetectionsJson,
  parsePseudoLabelsJson,
} from "../src/coco";

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("BoxArray", () => {
  it("builds columns from rows and reads them back", () => {
    const boxes = boxArrayFromRows([
      { x1: 0, y1: 0, x2: 10, y2: 10, score: 0.9, classId: 2, imageId: 7 },
      { x1: 1, y1: 1, x2: 11, y2: 11, score: 0.8 },
    ]);
    expect(boxCount(boxes)).toBe(2);
    expect(rowAt(boxes, 0)).toEqual({
      x1: 0, y1: 0, x2: 10, y2: 10, score: 0.9, classId: 2, imageId: 7,
    });
    expect(rowAt(boxes, 1).classId).toBe(0);
    expect(boxes.centerness).toBeNull();
  });

  it("rejects out-of-order corners naming the row", () => {
    expect(() =>
      boxArrayFromRows([
        { x1: 0, y1: 0, x2: 10, y2: 10, score: 0.5 },
        { x1: 5, y1: 0, x2: 4, y2: 10, score: 0.5 },
      ]),
    ).toThrow(/box 1: corners out of order/);
  });

  it("rejects scores and centerness outside [0, 1]", () => {
    expect(() =>
      boxArrayFromRows([{ x1: 0, y1: 0, x2: 1, y2: 1, score: 1.5 }]),
    ).toThrow(/box 0: score 1.5 outside \[0, 1\]/);
    expect(() =>
      boxArrayFromRows([{ x1: 0, y1: 0, x2: 1, y2: 1, score: 0.5, centerness: -0.1 }]),
    ).toThrow(/centerness -0.1 outside/);
  });

  it("rejects non-finite coordinates", () => {
    expect(() =>
      boxArrayFromRows([{ x1: 0, y1: 0, x2: NaN, y2: 1, score: 0.5 }]),
    ).toThrow(/box 0: coordinates must be finite/);
  });

  it("rejects a partial centerness column", () => {
    expect(() =>
      boxArrayFromRows([
        { x1: 0, y1: 0, x2: 1, y2: 1, score: 0.5, centerness: 0.9 },
        { x1: 2, y1: 2, x2: 3, y2: 3, score: 0.5 },
      ]),
    ).toThrow(/centerness set on 1 of 2 rows/);
  });

  it("rejects mismatched column lengths", () => {
    const boxes = boxArrayFromRows([{ x1: 0, y1: 0, x2: 1, y2: 1, score: 0.5 }]);
    const broken = { ...boxes, classId: new Int32Array(2) };
    expect(() => validateBoxArray(broken)).toThrow(/classId length 2 does not match 1/);
  });

  it("allows zero-extent detection boxes", () => {
    const boxes = boxArrayFromRows([{ x1: 5, y1: 5, x2: 5, y2: 9, score: 0.5 }]);
    expect(boxCount(boxes)).toBe(1);
  });
});

describe("exact extent encoding", () => {
  it("handles the classic shifted decade pair", () => {
    const w = exactExtent(0.1, 0.30000000000000004);
    expect(0.1 + w).toBe(0.30000000000000004);
  });

  it("handles zero width", () => {
    expect(exactExtent(2.5, 2.5)).toBe(0);
  });

  it("reproduces the high edge for random same-scale pairs", () => {
    const rand = mulberry32(11);
    for (let k = 0; k < 2000; k++) {
      const lo = (rand() - 0.5) * 200;
      const hi = lo + rand() * 50;
      const w = exactExtent(lo, hi);
      expect(lo + w).toBe(hi);
    }
  });

  it("reproduces the high edge at large offsets", () => {
    const rand = mulberry32(13);
    for (const offset of [1e9, 1e10, 1e11, 1e12]) {
      for (let k = 0; k < 100; k++) {
        const lo = offset + rand() * 1000;
        const hi = lo + rand() * 100;
        const w = exactExtent(lo, hi);
        expect(lo + w).toBe(hi);
      }
    }
  });

  it("refuses a pair with no exact encoding, like the backend writer", () => {
    // a half-ulp tie against an odd mantissa: both straddling sums round
    // away from the high edge, so no width can reproduce it
    expect(() => exactExtent(5.9158220894900335, 30.531059714132677)).toThrow(
      /no exact \(x, w\) encoding/,
    );
  });

  it("feeds cornersToXywh so parsing inverts serialization exactly", () => {
    const rand = mulberry32(17);
    const rows = Array.from({ length: 200 }, () => {
      const x1 = rand() * 100;
      const y1 = rand() * 100;
      return { x1, y1, x2: x1 + rand() * 30, y2: y1 + rand() * 30, score: rand() };
    });
    const round = parseDetectionsJson(detectionsToJson(boxArrayFromRows(rows)));
    rows.forEach((r, i) => {
      const got = rowAt(round, i);
      expect(got.x1).toBe(r.x1);
      expect(got.y1).toBe(r.y1);
      expect(got.x2).toBe(r.x2);
      expect(got.y2).toBe(r.y2);
      expect(got.score).toBe(r.score);
    });
  });
});

describe("detections JSON", () => {
  it("folds centerness into the score on parse", () => {
    const text = JSON.stringify([
      { image_id: 1, category_id: 2, bbox: [0, 0, 10, 10], score: 0.8, centerness: 0.5 },
    ]);
    const boxes = parseDetectionsJson(text);
    expect(boxes.score[0]).toBe(0.8 * 0.5);
    expect(boxes.centerness).toBeNull();
  });

  it("writes the centerness column when present", () => {
    const boxes = boxArrayFromRows([
      { x1: 0, y1: 0, x2: 4, y2: 4, score: 0.8, centerness: 0.5 },
    ]);
    const records = JSON.parse(detectionsToJson(boxes));
    expect(records[0].centerness).toBe(0.5);
    expect(records[0].score).toBe(0.8);
  });

  it("names the record on a malformed field", () => {
    expect(() =>
      parseDetectionsJson('[{"image_id": 1, "category_id": 1, "bbox": [0, 0, 1], "score": 0.5}]'),
    ).toThrow(/detections\[0\]: field "bbox" must be \[x, y, w, h\]/);
    expect(() =>
      parseDetectionsJson('[{"image_id": 1, "category_id": 1, "bbox": [0, 0, 1, 1]}]'),
    ).toThrow(/field "score" missing/);
  });

  it("rejects non-array documents", () => {
    expect(() => parseDetectionsJson("{}")).toThrow(/top level must be a JSON array/);
    expect(() => parseDetectionsJson("not json")).toThrow(/invalid JSON/);
  });

  it("round-trips an empty array", () => {
    expect(boxCount(parseDetectionsJson(detectionsToJson(emptyBoxArray())))).toBe(0);
  });
});

describe("pseudo-label JSON", () => {
  it("parses the uncertainty and cluster-size columns", () => {
    const labels = parsePseudoLabelsJson(
      JSON.stringify([
        {
          image_id: 0, category_id: 1, bbox: [0, 0, 10, 10],
          score: 0.9, uncertainty: 0.05, cluster_size: 2,
        },
      ]),
    );
    expect(boxCount(labels.kept)).toBe(1);
    expect(labels.uncertainty[0]).toBe(0.05);
    expect(labels.clusterSize[0]).toBe(2);
  });

  it("rejects singleton cluster sizes", () => {
    expect(() =>
      parsePseudoLabelsJson(
        JSON.stringify([
          {
            image_id: 0, category_id: 1, bbox: [0, 0, 10, 10],
            score: 0.9, uncertainty: 0.0, cluster_size: 1,
          },
        ]),
      ),
    ).toThrow(/labels\[0\]: cluster_size 1 below 2/);
  });
});

describe("annotation JSON", () => {
  it("synthesizes the image and category lists from the ids present", () => {
    const doc = JSON.parse(
      annotationsToJson([
        { x1: 0, y1: 0, x2: 10, y2: 10, classId: 3, imageId: 9 },
        { x1: 5, y1: 5, x2: 15, y2: 15, classId: 1, imageId: 9 },
      ]),
    );
    expect(doc.images).toEqual([{ id: 9 }]);
    expect(doc.categories).toEqual([{ id: 1 }, { id: 3 }]);
    expect(doc.annotations).toHaveLength(2);
    expect(doc.annotations[0].bbox).toEqual([0, 0, 10, 10]);
  });

  it("rejects zero-extent ground truths", () => {
    expect(() =>
      annotationsToJson([{ x1: 0, y1: 0, x2: 0, y2: 10 }]),
    ).toThrow(/ground truth 0: box must have positive extent/);
  });

  it("serializes an empty set as empty lists", () => {
    const doc = JSON.parse(annotationsToJson([]));
    expect(doc).toEqual({ images: [], categories: [], annotations: [] });
  });
});

describe("curve CSV", () => {
  const sample =
    `${CURVE_CSV_HEADER}\n` +
    "0.050000,0.500000,1.000000,0.666667,10,10,10\n" +
    "0.950000,1.000000,0.500000,0.666667,5,0,10\n";

  it("parses rows into typed points", () => {
    const points = parseCurveCsv(sample);
    expect(points).toHaveLength(2);
    expect(points[0]).toEqual({
      threshold: 0.05, precision: 0.5, recall: 1, f1: 0.666667, tp: 10, fp: 10, nGt: 10,
    });
    expect(points[1]!.nGt).toBe(10);
  });

  it("rejects a wrong header", () => {
    expect(() => parseCurveCsv("a,b,c\n")).toThrow(/expected header "threshold,precision/);
  });

  it("rejects short rows and non-numeric cells", () => {
    expect(() => parseCurveCsv(`${CURVE_CSV_HEADER}\n0.05,1,1\n`)).toThrow(
      /row 1: expected 7 columns, got 3/,
    );
    expect(() =>
      parseCurveCsv(`${CURVE_CSV_HEADER}\n0.05,x,1.0,1.0,1,0,1\n`),
    ).toThrow(/row 1: non-numeric cell/);
  });

  it("rejects fractional counts", () => {
    expect(() =>
      parseCurveCsv(`${CURVE_CSV_HEADER}\n0.05,1.0,1.0,1.0,1.5,0,1\n`),
    ).toThrow(/counts must be integers/);
  });
});
