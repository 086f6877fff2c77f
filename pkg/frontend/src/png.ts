/**
 * Canonical 8-bit grayscale PNG encoder.
 *
 * Filter-0 rows inside a zlib stream of stored (uncompressed) deflate
 * blocks, so identical pixel data always produces identical bytes —
 * the server writes marker and saliency PNGs with the exact same
 * layout, which makes byte-for-byte comparison possible.
 */

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function adler32(data: Uint8Array): number {
  const MOD = 65521;
  let a = 1;
  let b = 0;
  for (let i = 0; i < data.length; i++) {
    a = (a + data[i]) % MOD;
    b = (b + a) % MOD;
  }
  return ((b << 16) | a) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([
    (value >>> 24) & 0xff,
    (value >>> 16) & 0xff,
    (value >>> 8) & 0xff,
    value & 0xff,
  ]);
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

function chunk(tag: string, payload: Uint8Array): Uint8Array {
  const tagBytes = new TextEncoder().encode(tag);
  const body = concat([tagBytes, payload]);
  return concat([u32be(payload.length), body, u32be(crc32(body))]);
}

/** zlib container holding only stored deflate blocks (max 65535 bytes each). */
export function storedZlib(raw: Uint8Array): Uint8Array {
  const parts: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  let pos = 0;
  for (;;) {
    const block = raw.subarray(pos, pos + 65535);
    pos += block.length;
    const final = pos >= raw.length ? 1 : 0;
    const header = new Uint8Array(5);
    header[0] = final;
    header[1] = block.length & 0xff;
    header[2] = (block.length >>> 8) & 0xff;
    header[3] = (block.length ^ 0xffff) & 0xff;
    header[4] = ((block.length ^ 0xffff) >>> 8) & 0xff;
    parts.push(header, block);
    if (final) break;
  }
  parts.push(u32be(adler32(raw)));
  return concat(parts);
}

/** Encode a (height x width) uint8 buffer, row-major, as grayscale PNG bytes. */
export function encodeGrayPng(pixels: Uint8Array, height: number, width: number): Uint8Array {
  if (pixels.length !== height * width) {
    throw new Error(`pixel buffer has ${pixels.length} bytes, expected ${height * width}`);
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(u32be(width), 0);
  ihdr.set(u32be(height), 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  const raw = new Uint8Array(height * (width + 1));
  for (let i = 0; i < height; i++) {
    raw[i * (width + 1)] = 0; // filter type 0
    raw.set(pixels.subarray(i * width, (i + 1) * width), i * (width + 1) + 1);
  }
  return concat([
    new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", storedZlib(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}
