import { spawn, spawnSync } from "node:child_process";
import { existsSync, mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";
import { encodeRequest, Request } from "../src/protocol";

const DIST = resolve(__dirname, "..", "dist", "main.js");

interface Response {
  status: number;
  payload?: Float32Array;
  message?: string;
}

/** Test-side response parser, independent of the plugin sources. */
function parseResponses(buf: Buffer, expectValues: number): Response[] {
  const out: Response[] = [];
  let at = 0;
  while (at < buf.length) {
    expect(buf.toString("latin1", at, at + 4)).toBe("PNPR");
    const status = buf[at + 4]!;
    at += 5;
    if (status === 0) {
      const payload = new Float32Array(expectValues);
      for (let i = 0; i < expectValues; i++) {
        payload[i] = buf.readFloatLE(at + i * 4);
      }
      at += expectValues * 4;
      out.push({ status, payload });
    } else {
      const len = buf.readUInt32LE(at);
      at += 4;
      out.push({ status, message: buf.toString("utf-8", at, at + len) });
      at += len;
    }
  }
  return out;
}

function runPlugin(args: string[], requests: Buffer): Promise<{ stdout: Buffer; code: number | null }> {
  return new Promise((resolvePromise, reject) => {
    const proc = spawn("node", [DIST, ...args], { stdio: ["pipe", "pipe", "inherit"] });
    const chunks: Buffer[] = [];
    proc.stdout.on("data", (c: Buffer) => chunks.push(c));
    proc.on("error", reject);
    proc.on("close", (code) => resolvePromise({ stdout: Buffer.concat(chunks), code }));
    proc.stdin.write(requests);
    proc.stdin.end();
  });
}

function makeRequest(seed: number, loopIndex = 0, size = 8): Request {
  const payload = new Float32Array(size * size);
  let state = seed * 2654435761 + 1;
  for (let i = 0; i < payload.length; i++) {
    state = (state * 1103515245 + 12345) & 0x7fffffff;
    payload[i] = state / 0x7fffffff - 0.5;
  }
  return { width: size, height: size, loopIndex, strengthHint: 5e3, pixelSizeMm: 1.0, payload };
}

beforeAll(() => {
  if (!existsSync(DIST)) {
    throw new Error("dist/main.js missing: run `npm run build` before the tests");
  }
});

describe("plugin process", () => {
  it("echoes payloads bit for bit in identity mode", async () => {
    const req = makeRequest(1);
    const { stdout, code } = await runPlugin(["--mode", "identity"], encodeRequest(req));
    expect(code).toBe(0);
    const [res] = parseResponses(stdout, req.payload.length);
    expect(res!.status).toBe(0);
    expect(Buffer.from(res!.payload!.buffer).equals(Buffer.from(req.payload.buffer))).toBe(true);
  });

  it("answers several requests on one connection, one response each", async () => {
    const reqs = [makeRequest(1), makeRequest(2), makeRequest(3)];
    const { stdout, code } = await runPlugin(
      ["--mode", "identity"],
      Buffer.concat(reqs.map(encodeRequest)),
    );
    expect(code).toBe(0);
    const responses = parseResponses(stdout, reqs[0]!.payload.length);
    expect(responses.length).toBe(3);
    responses.forEach((res, i) => {
      expect(res.status).toBe(0);
      expect(Array.from(res.payload!)).toEqual(Array.from(reqs[i]!.payload));
    });
  });

  it("gaussian mode matches a direct 2D convolution oracle", async () => {
    const size = 16;
    const req = makeRequest(7, 0, size);
    const { stdout } = await runPlugin(["--mode", "gaussian", "--sigma", "1.0"], encodeRequest(req));
    const [res] = parseResponses(stdout, size * size);
    expect(res!.status).toBe(0);

    // direct dense convolution with reflect boundary, written against the
    // kernel definition rather than the plugin's separable code path
    const radius = 4;
    const taps: number[] = [];
    let norm = 0;
    for (let k = -radius; k <= radius; k++) {
      const w = Math.exp(-0.5 * k * k);
      taps.push(w);
      norm += w;
    }
    const reflect = (i: number) => (i < 0 ? -i - 1 : i >= size ? 2 * size - i - 1 : i);
    for (let r = 0; r < size; r++) {
      for (let c = 0; c < size; c++) {
        let acc = 0;
        for (let kr = -radius; kr <= radius; kr++) {
          for (let kc = -radius; kc <= radius; kc++) {
            const w = (taps[kr + radius]! / norm) * (taps[kc + radius]! / norm);
            acc += w * req.payload[reflect(r + kr) * size + reflect(c + kc)]!;
          }
        }
        expect(Math.abs(res!.payload![r * size + c]! - acc)).toBeLessThan(1e-6);
      }
    }
  });

  it("dispatches per-loop filters in loopmap mode", async () => {
    const reqs = [makeRequest(4, 0), makeRequest(4, 1)];
    const { stdout } = await runPlugin(
      ["--mode", "loopmap", "--loopmap", "0=identity,1=gaussian:1.0"],
      Buffer.concat(reqs.map(encodeRequest)),
    );
    const responses = parseResponses(stdout, reqs[0]!.payload.length);
    expect(responses.length).toBe(2);
    expect(Array.from(responses[0]!.payload!)).toEqual(Array.from(reqs[0]!.payload));
    // the blurred loop differs from its input
    expect(Array.from(responses[1]!.payload!)).not.toEqual(Array.from(reqs[1]!.payload));
  });

  it("answers status 1 for an unmapped loop index and keeps serving", async () => {
    const reqs = [makeRequest(4, 2), makeRequest(4, 0)];
    const { stdout, code } = await runPlugin(
      ["--mode", "loopmap", "--loopmap", "0=identity"],
      Buffer.concat(reqs.map(encodeRequest)),
    );
    expect(code).toBe(0);
    const responses = parseResponses(stdout, reqs[0]!.payload.length);
    expect(responses.length).toBe(2);
    expect(responses[0]!.status).toBe(1);
    expect(responses[0]!.message).toMatch(/loop_index 2/);
    expect(responses[1]!.status).toBe(0);
  });

  it("reports a malformed header with status 1", async () => {
    const garbage = Buffer.concat([Buffer.from("JUNKJUNKJUNK"), Buffer.alloc(64)]);
    const { stdout, code } = await runPlugin(["--mode", "identity"], garbage);
    const responses = parseResponses(stdout, 0);
    expect(responses[0]!.status).toBe(1);
    expect(responses[0]!.message).toMatch(/magic/);
    expect(code).toBe(1);
  });

  it("exits after N responses when asked to simulate a crash", async () => {
    const reqs = [makeRequest(1), makeRequest(2)];
    const { stdout, code } = await runPlugin(
      ["--mode", "identity", "--exit-after", "1"],
      Buffer.concat(reqs.map(encodeRequest)),
    );
    const responses = parseResponses(stdout, reqs[0]!.payload.length);
    expect(responses.length).toBe(1);
    expect(code).toBe(0);
  });
});

describe("integration with the reconstruction engine CLI", () => {
  const havePython =
    spawnSync("python3", ["-c", "import pnpct"], { stdio: "ignore" }).status === 0;

  it.skipIf(!havePython)("serves as the external plugin of a cascade", () => {
    const dir = mkdtempSync(join(tmpdir(), "pnpct-plugin-"));
    const cli = ["-m", "pnpct.cli"];
    const phantom = join(dir, "ph.img");
    const sino = join(dir, "sino.img");
    const out = join(dir, "out.img");
    const trace = join(dir, "trace.json");
    expect(
      spawnSync("python3", [...cli, "phantom", "--size", "24", "--scale", "0.1", "-o", phantom]).status,
    ).toBe(0);
    expect(
      spawnSync("python3", [
        ...cli, "project", "-i", phantom, "--views", "16", "--bins", "35", "--bin-width", "1.0", "-o", sino,
      ]).status,
    ).toBe(0);
    const endpoint = `external:node ${DIST} --mode loopmap --loopmap 0=identity,1=gaussian:1.0`;
    const run = spawnSync("python3", [
      ...cli, "pnp", "-i", sino, "--loops", "2", "--mu-sigma2", "5e3,7e3",
      "--plugin", endpoint, "--plugin", endpoint,
      "--init", "fbp", "--cg-iters", "5", "-o", out, "--trace", trace,
    ]);
    expect(run.status).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(existsSync(trace)).toBe(true);
  }, 60_000);
});
