/**
 * Binary framing of the engine<->plugin denoising protocol.
 *
 * Everything little-endian. Request:
 *   "PNPD" | u32 version=1 | u32 width | u32 height | u32 loopIndex |
 *   f64 strengthHint | f64 pixelSizeMm | width*height f32 row-major
 * Response:
 *   "PNPR" | u8 status (0 ok, 1 error) |
 *   ok: width*height f32 | error: u32 msgLen, utf-8 message
 */

export const REQUEST_MAGIC = "PNPD";
export const RESPONSE_MAGIC = "PNPR";
export const PROTOCOL_VERSION = 1;
export const HEADER_SIZE = 4 + 4 + 4 + 4 + 4 + 8 + 8;

export interface Request {
  width: number;
  height: number;
  loopIndex: number;
  strengthHint: number;
  pixelSizeMm: number;
  payload: Float32Array;
}

export class ProtocolViolation extends Error {}

/** Parse the fixed-size header; throws ProtocolViolation on bad fields. */
export function parseHeader(buf: Buffer): Omit<Request, "payload"> {
  if (buf.length < HEADER_SIZE) {
    throw new ProtocolViolation(`short header: ${buf.length} bytes`);
  }
  const magic = buf.toString("latin1", 0, 4);
  if (magic !== REQUEST_MAGIC) {
    throw new ProtocolViolation(`bad request magic ${JSON.stringify(magic)}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== PROTOCOL_VERSION) {
    throw new ProtocolViolation(`unsupported protocol version ${version}`);
  }
  const width = buf.readUInt32LE(8);
  const height = buf.readUInt32LE(12);
  if (width === 0 || height === 0) {
    throw new ProtocolViolation(`bad dimensions ${width}x${height}`);
  }
  return {
    width,
    height,
    loopIndex: buf.readUInt32LE(16),
    strengthHint: buf.readDoubleLE(20),
    pixelSizeMm: buf.readDoubleLE(28),
  };
}

export function payloadBytes(header: { width: number; height: number }): number {
  return header.width * header.height * 4;
}

export function decodePayload(buf: Buffer, header: { width: number; height: number }): Float32Array {
  const out = new Float32Array(header.width * header.height);
  for (let i = 0; i < out.length; i++) {
    out[i] = buf.readFloatLE(i * 4);
  }
  return out;
}

export function encodeRequest(req: Request): Buffer {
  const head = Buffer.alloc(HEADER_SIZE);
  head.write(REQUEST_MAGIC, 0, "latin1");
  head.writeUInt32LE(PROTOCOL_VERSION, 4);
  head.writeUInt32LE(req.width, 8);
  head.writeUInt32LE(req.height, 12);
  head.writeUInt32LE(req.loopIndex, 16);
  head.writeDoubleLE(req.strengthHint, 20);
  head.writeDoubleLE(req.pixelSizeMm, 28);
  const body = Buffer.alloc(req.payload.length * 4);
  for (let i = 0; i < req.payload.length; i++) {
    body.writeFloatLE(req.payload[i]!, i * 4);
  }
  return Buffer.concat([head, body]);
}

export function encodeOk(payload: Float32Array): Buffer {
  const body = Buffer.alloc(payload.length * 4);
  for (let i = 0; i < payload.length; i++) {
    body.writeFloatLE(payload[i]!, i * 4);
  }
  return Buffer.concat([Buffer.from(RESPONSE_MAGIC, "latin1"), Buffer.from([0]), body]);
}

export function encodeError(message: string): Buffer {
  const msg = Buffer.from(message, "utf-8");
  const len = Buffer.alloc(4);
  len.writeUInt32LE(msg.length, 0);
  return Buffer.concat([Buffer.from(RESPONSE_MAGIC, "latin1"), Buffer.from([1]), len, msg]);
}

/**
 * Incremental request reader: feed chunks, pull complete requests.
 * Keeps the stream position exactly at the next request boundary.
 */
export class RequestReader {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): void {
    this.buffer = this.buffer.length === 0 ? chunk : Buffer.concat([this.buffer, chunk]);
  }

  /** Returns the next complete request, or null if more bytes are needed. */
  next(): Request | null {
    if (this.buffer.length < HEADER_SIZE) {
      return null;
    }
    const header = parseHeader(this.buffer);
    const total = HEADER_SIZE + payloadBytes(header);
    if (this.buffer.length < total) {
      return null;
    }
    const payload = decodePayload(this.buffer.subarray(HEADER_SIZE, total), header);
    this.buffer = this.buffer.subarray(total);
    return { ...header, payload };
  }

  pendingBytes(): number {
    return this.buffer.length;
  }
}
