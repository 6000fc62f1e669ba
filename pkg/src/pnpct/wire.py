"""Binary stdin/stdout protocol between the engine and external denoisers.

Everything is little-endian. One request:

    magic   4s   b"PNPD"
    version u32  1
    width   u32  image columns
    height  u32  image rows
    loop    u32  zero-based cascade loop index
    hint    f64  denoising strength hint (the loop's mu_sigma2)
    pixel   f64  pixel size in mm
    payload width*height f32, row-major

One response:

    magic   4s   b"PNPR"
    status  u8   0 = ok, 1 = error
    ok:     payload width*height f32, row-major (request dimensions)
    error:  msg_len u32, then msg_len bytes of UTF-8

Transport is the plugin process's standard streams. In one-shot mode the
engine closes stdin after the single request and treats trailing bytes
after the response as a protocol violation; in persistent mode further
requests follow on the same streams and EOF terminates the session.
"""

import os
import select
import shlex
import struct
import subprocess
import threading
import time

import numpy as np

from .errors import PluginError, PluginTimeoutError, ProtocolError

__all__ = [
    "REQUEST_MAGIC",
    "RESPONSE_MAGIC",
    "PROTOCOL_VERSION",
    "pack_request",
    "ExternalPlugin",
]

REQUEST_MAGIC = b"PNPD"
RESPONSE_MAGIC = b"PNPR"
PROTOCOL_VERSION = 1

_HEADER = struct.Struct("<4sIIIIdd")


def pack_request(values: np.ndarray, loop_index: int, strength_hint: float,
                 pixel_size_mm: float) -> bytes:
    """Serialize one request frame for a (height, width) image array."""
    arr = np.asarray(values, dtype=np.float64)
    height, width = arr.shape
    header = _HEADER.pack(
        REQUEST_MAGIC, PROTOCOL_VERSION, width, height, int(loop_index),
        float(strength_hint), float(pixel_size_mm),
    )
    return header + arr.astype("<f4").tobytes()


class ExternalPlugin:
    """Client for one external denoiser process.

    ``persistent=False`` is one request per process: stdin is closed
    after the request and the stream must end right after the response.
    """

    def __init__(self, command: str, timeout: float = 60.0, persistent: bool = True):
        if not command.strip():
            raise PluginError("empty plugin command")
        self.command = command
        self.timeout = timeout
        self.persistent = persistent
        self._proc = None

    def _ensure_process(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        if self._proc is not None:
            raise PluginError(
                f"plugin process exited with code {self._proc.returncode}"
            )
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as err:
            raise PluginError(f"cannot launch plugin {self.command!r}: {err}") from err

    def _write_request(self, data: bytes, deadline: float):
        proc = self._proc
        failure = []

        def writer():
            try:
                proc.stdin.write(data)
                proc.stdin.flush()
                if not self.persistent:
                    proc.stdin.close()
            except (BrokenPipeError, OSError) as err:
                failure.append(err)

        t = threading.Thread(target=writer, daemon=True)
        t.start()
        t.join(max(deadline - time.monotonic(), 0.0))
        if t.is_alive():
            self._kill()
            raise PluginTimeoutError(
                f"plugin did not accept the request within {self.timeout} s"
            )
        if failure:
            raise PluginError(f"plugin closed its input: {failure[0]}")

    def _read_exact(self, n: int, deadline: float) -> bytes:
        fd = self._proc.stdout.fileno()
        chunks = []
        got = 0
        while got < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._kill()
                raise PluginTimeoutError(
                    f"plugin did not respond within {self.timeout} s"
                )
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.25))
            if not ready:
                continue
            chunk = os.read(fd, n - got)
            if chunk == b"":
                raise PluginError(
                    "plugin closed its output before completing the response"
                )
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def invoke(self, values: np.ndarray, loop_index: int, strength_hint: float,
               pixel_size_mm: float) -> np.ndarray:
        """Send one image, return the denoised image as float64."""
        arr = np.asarray(values, dtype=np.float64)
        height, width = arr.shape
        self._ensure_process()
        deadline = time.monotonic() + self.timeout
        try:
            self._write_request(
                pack_request(arr, loop_index, strength_hint, pixel_size_mm), deadline
            )
            head = self._read_exact(5, deadline)
            if head[:4] != RESPONSE_MAGIC:
                raise ProtocolError(f"bad response magic {head[:4]!r}")
            status = head[4]
            if status == 0:
                payload = self._read_exact(width * height * 4, deadline)
                out = (
                    np.frombuffer(payload, dtype="<f4")
                    .astype(np.float64)
                    .reshape(height, width)
                )
                if not self.persistent:
                    self._check_stream_end(deadline)
                return out
            if status == 1:
                (msg_len,) = struct.unpack("<I", self._read_exact(4, deadline))
                msg = self._read_exact(msg_len, deadline).decode("utf-8", "replace")
                raise PluginError(f"plugin reported an error: {msg}")
            raise ProtocolError(f"bad response status byte {status}")
        except PluginError:
            self._kill()
            raise
        finally:
            if not self.persistent:
                self.close()

    def _check_stream_end(self, deadline: float):
        # one request per connection: anything after the response means
        # the plugin produced a payload of the wrong size
        fd = self._proc.stdout.fileno()
        while True:
            remaining = deadline - time.monotonic()
            ready, _, _ = select.select([fd], [], [], max(min(remaining, 0.25), 0.01))
            if not ready:
                if remaining <= 0:
                    return
                continue
            extra = os.read(fd, 4096)
            if extra == b"":
                return
            raise ProtocolError(
                f"plugin sent {len(extra)}+ unexpected trailing bytes "
                "(payload dimensions differ from the request)"
            )

    def _kill(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def close(self):
        """Terminate the plugin process, politely first."""
        if self._proc is None:
            return
        try:
            if self._proc.stdin and not self._proc.stdin.closed:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._kill()
