/**
 * Analytic denoisers served by the example plugin.
 *
 * The gaussian mirrors the engine's built-in convention exactly: sampled
 * kernel exp(-k^2 / (2 sigma^2)) with radius round(4 sigma), normalized,
 * applied separably with symmetric (reflect-including-edge) boundaries.
 * A learned per-loop model would be loaded here instead; see loopmap.
 */

export type Filter = (img: Float64Array, width: number, height: number) => Float64Array;

export function identity(img: Float64Array): Float64Array {
  return img;
}

function reflectIndex(i: number, n: number): number {
  // symmetric boundary: ... c b a | a b c ... | c b a
  while (i < 0 || i >= n) {
    if (i < 0) {
      i = -i - 1;
    } else {
      i = 2 * n - i - 1;
    }
  }
  return i;
}

export function gaussianKernel(sigma: number): Float64Array {
  if (!(sigma > 0)) {
    throw new Error(`gaussian sigma must be positive, got ${sigma}`);
  }
  const radius = Math.round(4.0 * sigma);
  const taps = new Float64Array(2 * radius + 1);
  let sum = 0;
  for (let k = -radius; k <= radius; k++) {
    const w = Math.exp(-0.5 * (k / sigma) ** 2);
    taps[k + radius] = w;
    sum += w;
  }
  for (let i = 0; i < taps.length; i++) {
    taps[i]! /= sum;
  }
  return taps;
}

export function gaussianBlur(sigma: number): Filter {
  const taps = gaussianKernel(sigma);
  const radius = (taps.length - 1) / 2;
  return (img, width, height) => {
    const rows = new Float64Array(img.length);
    for (let r = 0; r < height; r++) {
      for (let c = 0; c < width; c++) {
        let acc = 0;
        for (let k = -radius; k <= radius; k++) {
          acc += taps[k + radius]! * img[reflectIndex(r + k, height) * width + c]!;
        }
        rows[r * width + c] = acc;
      }
    }
    const out = new Float64Array(img.length);
    for (let r = 0; r < height; r++) {
      for (let c = 0; c < width; c++) {
        let acc = 0;
        for (let k = -radius; k <= radius; k++) {
          acc += taps[k + radius]! * rows[r * width + reflectIndex(c + k, width)]!;
        }
        out[r * width + c] = acc;
      }
    }
    return out;
  };
}

export interface LoopMap {
  [loopIndex: number]: Filter;
}

/** Parse e.g. "0=identity,1=gaussian:1.0,2=gaussian:2.0". */
export function parseLoopMap(spec: string): LoopMap {
  const map: LoopMap = {};
  for (const entry of spec.split(",")) {
    const [key, value] = entry.split("=", 2);
    if (key === undefined || value === undefined || key.trim() === "") {
      throw new Error(`malformed loopmap entry ${JSON.stringify(entry)}`);
    }
    const loop = Number(key.trim());
    if (!Number.isInteger(loop) || loop < 0) {
      throw new Error(`loopmap index must be a non-negative integer: ${key}`);
    }
    map[loop] = parseFilter(value.trim());
  }
  return map;
}

export function parseFilter(spec: string): Filter {
  const [name, param] = spec.split(":", 2);
  if (name === "identity") {
    return identity;
  }
  if (name === "gaussian") {
    return gaussianBlur(Number(param ?? "1.0"));
  }
  throw new Error(`unknown filter ${JSON.stringify(spec)}`);
}
