import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { encodeGrayPng } from "../src/png.js";
import {
  MARKER_BACKGROUND,
  MARKER_OBJECT,
  MARKER_UNMARKED,
  Stroke,
  rasterizeStrokes,
} from "../src/raster.js";

const FIXTURES = join(__dirname, "fixtures");

interface StrokeFixture {
  height: number;
  width: number;
  strokes: Stroke[];
}

function loadFixture(name: string): { fixture: StrokeFixture; png: Uint8Array } {
  const fixture = JSON.parse(
    readFileSync(join(FIXTURES, `${name}.json`), "utf-8"),
  ) as StrokeFixture;
  const png = new Uint8Array(readFileSync(join(FIXTURES, `${name}.png`)));
  return { fixture, png };
}

describe("stroke rasterization parity with the server reference", () => {
  for (const name of ["single_dot", "polyline_mix", "clipped_edges"]) {
    it(`fixture ${name} produces a byte-identical marker PNG`, () => {
      const { fixture, png } = loadFixture(name);
      const raster = rasterizeStrokes(fixture.height, fixture.width, fixture.strokes);
      const encoded = encodeGrayPng(raster, fixture.height, fixture.width);
      expect(Buffer.from(encoded).equals(Buffer.from(png))).toBe(true);
    });
  }
});

describe("rasterization semantics", () => {
  it("a dot stroke covers exactly the Euclidean disk", () => {
    const r = 3;
    const raster = rasterizeStrokes(15, 15, [
      { cls: "object", radius: r, points: [[7, 7]] },
    ]);
    for (let i = 0; i < 15; i++) {
      for (let j = 0; j < 15; j++) {
        const inside = (i - 7) ** 2 + (j - 7) ** 2 <= r * r;
        expect(raster[i * 15 + j]).toBe(inside ? MARKER_OBJECT : MARKER_UNMARKED);
      }
    }
  });

  it("a horizontal segment covers the radius corridor", () => {
    const raster = rasterizeStrokes(9, 20, [
      { cls: "background", radius: 1, points: [[4, 3], [4, 16]] },
    ]);
    expect(raster[4 * 20 + 3]).toBe(MARKER_BACKGROUND);
    expect(raster[4 * 20 + 10]).toBe(MARKER_BACKGROUND);
    expect(raster[3 * 20 + 10]).toBe(MARKER_BACKGROUND);
    expect(raster[5 * 20 + 16]).toBe(MARKER_BACKGROUND);
    expect(raster[2 * 20 + 10]).toBe(MARKER_UNMARKED);
    expect(raster[4 * 20 + 1]).toBe(MARKER_UNMARKED);
  });

  it("later strokes overwrite earlier ones", () => {
    const raster = rasterizeStrokes(7, 7, [
      { cls: "object", radius: 2, points: [[3, 3]] },
      { cls: "background", radius: 1, points: [[3, 3]] },
    ]);
    expect(raster[3 * 7 + 3]).toBe(MARKER_BACKGROUND);
    expect(raster[3 * 7 + 5]).toBe(MARKER_OBJECT);
  });

  it("strokes outside the canvas are clipped", () => {
    const raster = rasterizeStrokes(5, 5, [
      { cls: "object", radius: 2, points: [[-10, -10]] },
    ]);
    expect(raster.every((v) => v === MARKER_UNMARKED)).toBe(true);
  });

  it("empty stroke lists leave the raster unmarked", () => {
    const raster = rasterizeStrokes(4, 4, [
      { cls: "object", radius: 3, points: [] },
    ]);
    expect(raster.every((v) => v === MARKER_UNMARKED)).toBe(true);
  });
});
