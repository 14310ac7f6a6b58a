/**
 * Standalone studio round-trip: draw a blob, send it to /generate, verify the
 * response renders and carries provenance. Exits nonzero on any failure.
 *
 *   SERVER_URL=http://127.0.0.1:8000 npm run roundtrip
 */

import { ApiError, StudioClient } from "../src/api.js";
import { createCanvasState, exportCanvas, isAllWhite } from "../src/raster.js";

const SERVER_URL = process.env.SERVER_URL ?? "http://127.0.0.1:8000";

let failures = 0;

function check(name: string, ok: boolean, detail = ""): void {
  if (ok) {
    console.log(`PASS — ${name}`);
  } else {
    failures += 1;
    console.error(`FAIL — ${name}${detail ? `: ${detail}` : ""}`);
  }
}

async function main(): Promise<void> {
  const client = new StudioClient(SERVER_URL);
  check("server reachable", await client.health(), SERVER_URL);

  const empty = exportCanvas(createCanvasState(64));
  check("empty canvas exports all-white", isAllWhite(empty));

  const state = createCanvasState(64);
  const s = state.surfaceSize;
  state.strokes.push({
    points: [
      { x: s * 0.2, y: s * 0.25 },
      { x: s * 0.75, y: s * 0.3 },
      { x: s * 0.45, y: s * 0.8 },
    ],
    width: 3,
  });
  const blob = exportCanvas(state);
  check("blob has ink", !isAllWhite(blob));

  const styles = await client.styles();
  check("style gallery populated", styles.length > 0, JSON.stringify(styles));

  const result = await client.generate({ content: blob.base64, style: styles[0] });
  const png = Buffer.from(result.imageBase64, "base64");
  const isPng = png.subarray(0, 8).equals(Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]));
  check("generate returns a PNG", isPng);
  check(
    "provenance present",
    typeof result.referenceCharcode === "string",
    String(result.referenceCharcode)
  );

  const err = await client
    .generate({ content: blob.base64, style: "no-such-style" })
    .catch((e: unknown) => e);
  check("unknown style -> 404", err instanceof ApiError && err.status === 404);

  const ragged = await client.generate({
    content: blob.base64,
    style: styles[0],
    useRag: true,
  });
  check("rag round-trip returns provenance", typeof ragged.referenceCharcode === "string");

  if (failures > 0) {
    process.exit(1);
  }
  console.log("round-trip complete");
}

main().catch((err) => {
  console.error(`FAIL — unexpected error: ${err}`);
  process.exit(1);
});
