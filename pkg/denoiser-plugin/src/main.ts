#!/usr/bin/env node
/**
 * Example external denoiser for the pnpct reconstruction engine.
 *
 * Serves denoising requests over stdin/stdout using the binary protocol
 * in protocol.ts, one response per request, until EOF. Modes:
 *
 *   --mode identity               echo the payload bit for bit
 *   --mode gaussian --sigma S     separable gaussian blur
 *   --mode loopmap --loopmap M    per-loop filter dispatch, e.g.
 *                                 "0=identity,1=gaussian:1.0"; requests
 *                                 for unmapped loops get a status-1 error
 *
 * --exit-after N ends the process abruptly after N responses (used by
 * integration tests to simulate a plugin dying mid-cascade).
 */

import { parseArgs } from "node:util";
import { Filter, gaussianBlur, identity, parseLoopMap, LoopMap } from "./filters";
import { ProtocolViolation, Request, RequestReader, encodeError, encodeOk } from "./protocol";

interface Options {
  mode: "identity" | "gaussian" | "loopmap";
  sigma: number;
  loopmap: LoopMap;
  exitAfter: number;
}

function parseOptions(argv: string[]): Options {
  const { values } = parseArgs({
    args: argv,
    options: {
      mode: { type: "string", default: "identity" },
      sigma: { type: "string", default: "1.0" },
      loopmap: { type: "string", default: "" },
      "exit-after": { type: "string", default: "0" },
    },
  });
  const mode = values.mode as Options["mode"];
  if (!["identity", "gaussian", "loopmap"].includes(mode)) {
    throw new Error(`unknown mode ${JSON.stringify(values.mode)}`);
  }
  if (mode === "loopmap" && !values.loopmap) {
    throw new Error("--mode loopmap requires --loopmap");
  }
  return {
    mode,
    sigma: Number(values.sigma),
    loopmap: values.loopmap ? parseLoopMap(values.loopmap as string) : {},
    exitAfter: Number(values["exit-after"]),
  };
}

function selectFilter(opts: Options, req: Request): Filter {
  if (opts.mode === "identity") {
    return identity;
  }
  if (opts.mode === "gaussian") {
    return gaussianBlur(opts.sigma);
  }
  const filter = opts.loopmap[req.loopIndex];
  if (filter === undefined) {
    throw new ProtocolViolation(`no filter mapped for loop_index ${req.loopIndex}`);
  }
  return filter;
}

function handle(opts: Options, req: Request): Buffer {
  if (opts.mode === "identity") {
    // bit-exact echo, no float64 round trip
    return encodeOk(req.payload);
  }
  const filter = selectFilter(opts, req);
  const img = Float64Array.from(req.payload);
  const out = filter(img, req.width, req.height);
  return encodeOk(Float32Array.from(out));
}

async function serve(opts: Options): Promise<number> {
  const reader = new RequestReader();
  let responses = 0;
  const write = (buf: Buffer) =>
    new Promise<void>((resolve, reject) => {
      process.stdout.write(buf, (err) => (err ? reject(err) : resolve()));
    });

  for await (const chunk of process.stdin) {
    reader.push(chunk as Buffer);
    for (;;) {
      let req: Request | null;
      try {
        req = reader.next();
      } catch (err) {
        // malformed header: report and stop, the stream position is lost
        await write(encodeError(`malformed request: ${(err as Error).message}`));
        return 1;
      }
      if (req === null) {
        break;
      }
      try {
        await write(handle(opts, req));
      } catch (err) {
        await write(encodeError((err as Error).message));
        continue;
      }
      responses += 1;
      if (opts.exitAfter > 0 && responses >= opts.exitAfter) {
        return 0;
      }
    }
  }
  if (reader.pendingBytes() > 0) {
    await write(encodeError(`stream ended mid-request (${reader.pendingBytes()} bytes pending)`));
    return 1;
  }
  return 0;
}

async function main(): Promise<void> {
  let opts: Options;
  try {
    opts = parseOptions(process.argv.slice(2));
  } catch (err) {
    console.error(`pnpct-denoiser-plugin: ${(err as Error).message}`);
    process.exit(2);
  }
  process.exit(await serve(opts));
}

main().catch((err) => {
  console.error(`pnpct-denoiser-plugin: fatal: ${err}`);
  process.exit(1);
});
