import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { adler32, crc32, encodeGrayPng, storedZlib } from "../src/png.js";

const FIXTURES = join(__dirname, "fixtures");

describe("canonical grayscale PNG encoder", () => {
  it("reproduces the server-written gradient sample byte for byte", () => {
    const h = 300;
    const w = 300;
    const pixels = new Uint8Array(h * w);
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        pixels[i * w + j] = ((i + j) * 7) % 256;
      }
    }
    const got = encodeGrayPng(pixels, h, w);
    const want = new Uint8Array(readFileSync(join(FIXTURES, "gradient300.png")));
    expect(got.length).toBe(want.length);
    expect(Buffer.from(got).equals(Buffer.from(want))).toBe(true);
  });

  it("starts with the PNG signature and IHDR", () => {
    const png = encodeGrayPng(new Uint8Array([0, 128, 255, 64]), 2, 2);
    expect([...png.subarray(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    expect(new TextDecoder().decode(png.subarray(12, 16))).toBe("IHDR");
    // width and height big-endian
    expect(png[19]).toBe(2);
    expect(png[23]).toBe(2);
    expect(png[24]).toBe(8); // bit depth
    expect(png[25]).toBe(0); // grayscale color type
  });

  it("ends with an empty IEND chunk", () => {
    const png = encodeGrayPng(new Uint8Array(1), 1, 1);
    const tail = png.subarray(png.length - 12);
    expect(new TextDecoder().decode(tail.subarray(4, 8))).toBe("IEND");
  });

  it("splits stored deflate data into 65535-byte blocks", () => {
    const raw = new Uint8Array(70000).fill(7);
    const z = storedZlib(raw);
    expect(z[0]).toBe(0x78);
    expect(z[1]).toBe(0x01);
    expect(z[2]).toBe(0); // first block not final
    const len = z[3] | (z[4] << 8);
    expect(len).toBe(65535);
    const nlen = z[5] | (z[6] << 8);
    expect(nlen).toBe(65535 ^ 0xffff);
    expect(z[7 + 65535]).toBe(1); // second block is final
  });

  it("matches known crc32 and adler32 values", () => {
    const data = new TextEncoder().encode("hello");
    expect(crc32(data)).toBe(0x3610a686);
    expect(adler32(data)).toBe(0x062c0215);
    expect(crc32(new Uint8Array(0))).toBe(0);
    expect(adler32(new Uint8Array(0))).toBe(1);
  });

  it("rejects mismatched buffer sizes", () => {
    expect(() => encodeGrayPng(new Uint8Array(5), 2, 3)).toThrow(/expected 6/);
  });
});
