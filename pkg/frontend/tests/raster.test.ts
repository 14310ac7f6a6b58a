import { describe, expect, it } from "vitest";

import {
  clampBrush,
  createCanvasState,
  downsample,
  exportCanvas,
  isAllWhite,
  rasterizeStrokes,
  toBase64,
} from "../src/raster.js";

describe("exportCanvas", () => {
  it("exports an all-white image for an empty canvas", () => {
    const state = createCanvasState(64);
    const out = exportCanvas(state);
    expect(out.gray.length).toBe(64 * 64);
    expect(isAllWhite(out)).toBe(true);
    expect(out.gray.every((v) => v === 255)).toBe(true);
  });

  it("a single stroke produces true black ink", () => {
    const state = createCanvasState(64);
    state.strokes.push({ points: [{ x: 40, y: 40 }, { x: 200, y: 200 }], width: 3 });
    const out = exportCanvas(state);
    expect(Math.min(...out.gray)).toBe(0);
    expect(isAllWhite(out)).toBe(false);
  });

  it("exports identical bytes when nothing changed", () => {
    const state = createCanvasState(64);
    state.strokes.push({ points: [{ x: 10, y: 30 }, { x: 120, y: 90 }], width: 2 });
    const a = exportCanvas(state);
    const b = exportCanvas(state);
    expect(Buffer.from(a.png).equals(Buffer.from(b.png))).toBe(true);
    expect(a.base64).toBe(b.base64);
  });

  it("always matches the server dimension contract", () => {
    for (const size of [32, 64, 80]) {
      const state = createCanvasState(size);
      state.strokes.push({ points: [{ x: 5, y: 5 }, { x: 20, y: 20 }], width: 1 });
      expect(exportCanvas(state).gray.length).toBe(size * size);
    }
  });
});

describe("rasterizeStrokes", () => {
  it("draws round caps beyond segment endpoints", () => {
    const state = createCanvasState(64);
    const scale = state.surfaceSize / 64; // 4
    state.strokes.push({ points: [{ x: 128, y: 128 }, { x: 160, y: 128 }], width: 4 });
    const grid = rasterizeStrokes(state);
    const radius = (4 * scale) / 2;
    // a pixel just left of the start point, inside the cap radius
    const x = Math.floor(128 - radius / 2);
    expect(grid[128 * state.surfaceSize + x]).toBe(0);
  });

  it("supports single-point dabs", () => {
    const state = createCanvasState(64);
    state.strokes.push({ points: [{ x: 100, y: 100 }], width: 2 });
    const grid = rasterizeStrokes(state);
    expect(grid[100 * state.surfaceSize + 100]).toBe(0);
  });

  it("wider brushes cover strictly more pixels", () => {
    const counts: number[] = [];
    for (const width of [1, 2, 3, 4]) {
      const state = createCanvasState(64);
      state.strokes.push({ points: [{ x: 50, y: 50 }, { x: 200, y: 180 }], width });
      const grid = rasterizeStrokes(state);
      counts.push(grid.reduce((s, v) => s + (v === 0 ? 1 : 0), 0));
    }
    expect(counts[0]).toBeGreaterThan(0);
    expect(counts).toEqual([...counts].sort((a, b) => a - b));
    expect(new Set(counts).size).toBe(4);
  });
});

describe("downsample", () => {
  it("averages blocks", () => {
    const grid = new Float32Array(4 * 4).fill(1);
    grid[0] = 0;
    grid[1] = 0;
    grid[4] = 0;
    grid[5] = 0; // top-left 2x2 block fully ink
    const out = downsample(grid, 4, 2);
    expect(out[0]).toBe(0);
    expect(out[1]).toBe(1);
    expect(out[2]).toBe(1);
    expect(out[3]).toBe(1);
  });

  it("rejects non-integer ratios", () => {
    expect(() => downsample(new Float32Array(9), 3, 2)).toThrow();
  });
});

describe("helpers", () => {
  it("clamps brush widths to 1..4", () => {
    expect(clampBrush(0)).toBe(1);
    expect(clampBrush(2.4)).toBe(2);
    expect(clampBrush(9)).toBe(4);
  });

  it("base64 agrees with node's encoder", () => {
    const bytes = new Uint8Array([0, 1, 2, 250, 251, 252, 77]);
    expect(toBase64(bytes)).toBe(Buffer.from(bytes).toString("base64"));
    expect(toBase64(new Uint8Array([1]))).toBe(Buffer.from([1]).toString("base64"));
    expect(toBase64(new Uint8Array([1, 2]))).toBe(Buffer.from([1, 2]).toString("base64"));
  });
});
