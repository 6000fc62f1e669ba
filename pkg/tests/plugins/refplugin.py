"""Minimal stdin/stdout denoiser used by the engine tests.

Deliberately does NOT import pnpct: the framing here is written from the
protocol description so engine bugs cannot cancel against library code.

Modes: identity, gaussian (with --sigma), plus failure injectors for the
error-path tests (--exit-after N, --sleep S, --garbage-magic,
--wrong-size, --error-status).
"""

import argparse
import struct
import sys
import time

import numpy as np

HEADER = struct.Struct("<4sIIIIdd")


def read_exact(stream, n):
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            return None if not buf else buf
        buf += chunk
    return buf


def gaussian_blur(img, sigma):
    radius = int(4.0 * sigma + 0.5)
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    k /= k.sum()
    # reflect (symmetric) padding, separable convolution
    pad = np.pad(img, ((radius, radius), (0, 0)), mode="symmetric")
    out = np.empty_like(img)
    for i in range(img.shape[0]):
        out[i] = k @ pad[i : i + 2 * radius + 1]
    pad = np.pad(out, ((0, 0), (radius, radius)), mode="symmetric")
    out2 = np.empty_like(img)
    for j in range(img.shape[1]):
        out2[:, j] = pad[:, j : j + 2 * radius + 1] @ k
    return out2


def respond_ok(stream, payload_f32):
    stream.write(b"PNPR" + bytes([0]) + payload_f32.tobytes())
    stream.flush()


def respond_error(stream, message):
    data = message.encode("utf-8")
    stream.write(b"PNPR" + bytes([1]) + struct.pack("<I", len(data)) + data)
    stream.flush()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", default="identity", choices=["identity", "gaussian"])
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--exit-after", type=int, default=0,
                    help="serve N requests then exit abruptly")
    ap.add_argument("--sleep", type=float, default=0.0,
                    help="delay before each response")
    ap.add_argument("--garbage-magic", action="store_true")
    ap.add_argument("--wrong-size", action="store_true")
    ap.add_argument("--error-status", action="store_true")
    args = ap.parse_args()

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    served = 0
    while True:
        head = read_exact(stdin, HEADER.size)
        if head is None:
            return 0
        if len(head) < HEADER.size:
            respond_error(stdout, "truncated request header")
            return 1
        magic, version, width, height, loop_index, hint, pixel = HEADER.unpack(head)
        if magic != b"PNPD" or version != 1:
            respond_error(stdout, f"bad magic/version {magic!r}/{version}")
            return 1
        payload = read_exact(stdin, width * height * 4)
        if payload is None or len(payload) < width * height * 4:
            respond_error(stdout, "truncated request payload")
            return 1
        img = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        img = img.reshape(height, width)

        if args.sleep:
            time.sleep(args.sleep)
        if args.garbage_magic:
            stdout.write(b"XXXX" + bytes([0]) + payload)
            stdout.flush()
            return 0
        if args.error_status:
            respond_error(stdout, "refusing on purpose")
            continue
        if args.wrong_size:
            respond_ok(stdout, img.astype("<f4")[: height // 2])
            continue

        if args.mode == "gaussian":
            img = gaussian_blur(img, args.sigma)
        respond_ok(stdout, img.astype("<f4"))
        served += 1
        if args.exit_after and served >= args.exit_after:
            return 0


if __name__ == "__main__":
    sys.exit(main())
