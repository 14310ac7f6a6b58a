/**
 * Stroke capture and rasterization for the drawing surface.
 *
 * Strokes are rasterized analytically (round caps, hard edges) on an
 * upsampled surface, then box-downsampled to the server's glyph size, so the
 * exported bytes are identical across browsers and node. Ink is dark (0) on
 * a white (255) background, matching the model's input convention.
 */

import { encodeGrayPng } from "./png.js";

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  /** polyline in surface pixel coordinates */
  points: Point[];
  /** brush width in export pixels (1..4) */
  width: number;
}

export interface CanvasState {
  strokes: Stroke[];
  /** drawing resolution, a multiple of exportSize (e.g. 256) */
  surfaceSize: number;
  /** server-side glyph size (e.g. 64) */
  exportSize: number;
}

export function createCanvasState(exportSize: number, upsample = 4): CanvasState {
  return { strokes: [], surfaceSize: exportSize * upsample, exportSize };
}

export const MIN_BRUSH = 1;
export const MAX_BRUSH = 4;

export function clampBrush(width: number): number {
  return Math.min(MAX_BRUSH, Math.max(MIN_BRUSH, Math.round(width)));
}

function distToSegmentSq(px: number, py: number, a: Point, b: Point): number {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const lenSq = dx * dx + dy * dy;
  let t = 0;
  if (lenSq > 0) {
    t = ((px - a.x) * dx + (py - a.y) * dy) / lenSq;
    t = Math.min(1, Math.max(0, t));
  }
  const cx = a.x + t * dx;
  const cy = a.y + t * dy;
  return (px - cx) * (px - cx) + (py - cy) * (py - cy);
}

/** White 1.0 / ink 0.0 grid at surface resolution. */
export function rasterizeStrokes(state: CanvasState): Float32Array {
  const n = state.surfaceSize;
  const grid = new Float32Array(n * n).fill(1);
  const scale = state.surfaceSize / state.exportSize;
  for (const stroke of state.strokes) {
    if (stroke.points.length === 0) continue;
    const radius = (clampBrush(stroke.width) * scale) / 2;
    const rSq = radius * radius;
    const segments: Array<[Point, Point]> = [];
    if (stroke.points.length === 1) {
      segments.push([stroke.points[0], stroke.points[0]]);
    } else {
      for (let i = 0; i + 1 < stroke.points.length; i++) {
        segments.push([stroke.points[i], stroke.points[i + 1]]);
      }
    }
    for (const [a, b] of segments) {
      const x0 = Math.max(0, Math.floor(Math.min(a.x, b.x) - radius - 1));
      const x1 = Math.min(n - 1, Math.ceil(Math.max(a.x, b.x) + radius + 1));
      const y0 = Math.max(0, Math.floor(Math.min(a.y, b.y) - radius - 1));
      const y1 = Math.min(n - 1, Math.ceil(Math.max(a.y, b.y) + radius + 1));
      for (let y = y0; y <= y1; y++) {
        for (let x = x0; x <= x1; x++) {
          if (distToSegmentSq(x + 0.5, y + 0.5, a, b) <= rSq) {
            grid[y * n + x] = 0;
          }
        }
      }
    }
  }
  return grid;
}

/** Box-filter average down to export resolution (integer ratio required). */
export function downsample(grid: Float32Array, from: number, to: number): Float32Array {
  if (from % to !== 0) {
    throw new Error(`surface size ${from} is not a multiple of export size ${to}`);
  }
  const k = from / to;
  const out = new Float32Array(to * to);
  for (let y = 0; y < to; y++) {
    for (let x = 0; x < to; x++) {
      let sum = 0;
      for (let dy = 0; dy < k; dy++) {
        for (let dx = 0; dx < k; dx++) {
          sum += grid[(y * k + dy) * from + (x * k + dx)];
        }
      }
      out[y * to + x] = sum / (k * k);
    }
  }
  return out;
}

const B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

export function toBase64(bytes: Uint8Array): string {
  let out = "";
  for (let i = 0; i < bytes.length; i += 3) {
    const a = bytes[i];
    const b = i + 1 < bytes.length ? bytes[i + 1] : 0;
    const c = i + 2 < bytes.length ? bytes[i + 2] : 0;
    out += B64[a >> 2] + B64[((a & 3) << 4) | (b >> 4)];
    out += i + 1 < bytes.length ? B64[((b & 15) << 2) | (c >> 6)] : "=";
    out += i + 2 < bytes.length ? B64[c & 63] : "=";
  }
  return out;
}

export interface ExportedCanvas {
  /** 8-bit grayscale rows, exportSize x exportSize */
  gray: Uint8Array;
  png: Uint8Array;
  base64: string;
}

/** Deterministic export: same strokes always yield identical bytes. */
export function exportCanvas(state: CanvasState): ExportedCanvas {
  const small = downsample(rasterizeStrokes(state), state.surfaceSize, state.exportSize);
  const gray = new Uint8Array(small.length);
  for (let i = 0; i < small.length; i++) {
    gray[i] = Math.round(small[i] * 255);
  }
  const png = encodeGrayPng(gray, state.exportSize, state.exportSize);
  return { gray, png, base64: toBase64(png) };
}

export function isAllWhite(exported: ExportedCanvas): boolean {
  return exported.gray.every((v) => v === 255);
}
