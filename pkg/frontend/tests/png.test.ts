import { inflateSync } from "node:zlib";

import { describe, expect, it } from "vitest";

import { adler32, crc32, encodeGrayPng } from "../src/png.js";

function readChunks(png: Uint8Array) {
  const chunks: Array<{ type: string; data: Uint8Array }> = [];
  let off = 8;
  while (off < png.length) {
    const len = (png[off] << 24) | (png[off + 1] << 16) | (png[off + 2] << 8) | png[off + 3];
    const type = String.fromCharCode(...png.subarray(off + 4, off + 8));
    const data = png.subarray(off + 8, off + 8 + len);
    const stored =
      ((png[off + 8 + len] << 24) |
        (png[off + 9 + len] << 16) |
        (png[off + 10 + len] << 8) |
        png[off + 11 + len]) >>>
      0;
    const computed = crc32(png.subarray(off + 4, off + 8 + len));
    expect(stored).toBe(computed);
    chunks.push({ type, data });
    off += 12 + len;
  }
  return chunks;
}

describe("encodeGrayPng", () => {
  it("produces a decodable grayscale PNG", () => {
    const w = 5;
    const h = 3;
    const gray = new Uint8Array([...Array(w * h).keys()].map((i) => (i * 17) % 256));
    const png = encodeGrayPng(gray, w, h);

    expect([...png.subarray(0, 8)]).toEqual([137, 80, 78, 71, 13, 10, 26, 10]);
    const chunks = readChunks(png);
    expect(chunks.map((c) => c.type)).toEqual(["IHDR", "IDAT", "IEND"]);

    const ihdr = chunks[0].data;
    const width = (ihdr[0] << 24) | (ihdr[1] << 16) | (ihdr[2] << 8) | ihdr[3];
    const height = (ihdr[4] << 24) | (ihdr[5] << 16) | (ihdr[6] << 8) | ihdr[7];
    expect([width, height]).toEqual([w, h]);
    expect(ihdr[8]).toBe(8); // bit depth
    expect(ihdr[9]).toBe(0); // grayscale

    // node's inflate validates the zlib wrapper (incl. adler32)
    const raw = inflateSync(Buffer.from(chunks[1].data));
    expect(raw.length).toBe(h * (w + 1));
    for (let y = 0; y < h; y++) {
      expect(raw[y * (w + 1)]).toBe(0); // filter byte None
      for (let x = 0; x < w; x++) {
        expect(raw[y * (w + 1) + 1 + x]).toBe(gray[y * w + x]);
      }
    }
  });

  it("handles payloads larger than one stored-deflate block", () => {
    const w = 300;
    const h = 300; // raw stream 90300 bytes > 65535
    const gray = new Uint8Array(w * h).fill(200);
    const png = encodeGrayPng(gray, w, h);
    const chunks = readChunks(png);
    const raw = inflateSync(Buffer.from(chunks[1].data));
    expect(raw.length).toBe(h * (w + 1));
    expect(raw[1]).toBe(200);
    expect(raw[raw.length - 1]).toBe(200);
  });

  it("rejects mismatched buffer sizes", () => {
    expect(() => encodeGrayPng(new Uint8Array(10), 4, 4)).toThrow();
  });

  it("checksums match reference vectors", () => {
    // classic known values
    const abc = new Uint8Array([97, 98, 99]);
    expect(crc32(abc)).toBe(0x352441c2);
    expect(adler32(abc)).toBe(0x024d0127);
  });
});
