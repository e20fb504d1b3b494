#!/usr/bin/env python3
"""Reference denoiser server for the wire protocol.

Speaks the little-endian framing over stdio (default) or a TCP socket:
  request:  b"PNPX" | version u8=1 | opcode u8 | sigma f32 | C u32 | H u32 | W u32
            | C*H*W f32
  response: b"PNPX" | status u8 (0 = ok) | payload
            opcode 1 (denoise):   C*H*W f32
            opcode 2 (potential): one f32

Modes:
  echo              D(x) = x, potential 0 (round-trip checks)
  half              D(x) = x/2, i.e. grad g(x) = x/2, potential g(x) = sum(x^2)/4
  scale             D(x) = FACTOR*x, potential ((1-FACTOR)/2)*sum(x^2)
  decline-potential denoise as `half`, but answer opcode 2 with status 2
  bad-magic         reply with a corrupted magic (client robustness checks)
  truncate          reply with half a frame then exit
"""

import argparse
import socket
import struct
import sys

MAGIC = b"PNPX"
VERSION = 1
OP_DENOISE = 1
OP_POTENTIAL = 2

HEADER = struct.Struct("<4sBBfIII")


def read_exact(stream, n):
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            if not buf:
                return None  # clean EOF between frames
            raise EOFError("peer closed mid-frame")
        buf += chunk
    return buf


def serve_stream(rd, wr, args):
    while True:
        head = read_exact(rd, HEADER.size)
        if head is None:
            return
        magic, version, opcode, sigma, c, h, w = HEADER.unpack(head)
        if magic != MAGIC or version != VERSION:
            wr.write(MAGIC + bytes([3]))
            wr.flush()
            return
        n = c * h * w
        payload = struct.unpack("<%df" % n, read_exact(rd, 4 * n))

        if args.mode == "bad-magic":
            wr.write(b"XXXX" + bytes([0]) + struct.pack("<%df" % n, *payload))
            wr.flush()
            continue
        if args.mode == "truncate":
            frame = MAGIC + bytes([0]) + struct.pack("<%df" % n, *payload)
            wr.write(frame[: len(frame) // 2])
            wr.flush()
            return

        if args.mode == "echo":
            factor, quad = 1.0, 0.0
        elif args.mode in ("half", "decline-potential"):
            factor, quad = 0.5, 0.25
        else:  # scale
            factor = args.factor
            quad = (1.0 - factor) / 2.0

        if opcode == OP_DENOISE:
            out = [factor * v for v in payload]
            wr.write(MAGIC + bytes([0]) + struct.pack("<%df" % n, *out))
        elif opcode == OP_POTENTIAL:
            if args.mode == "decline-potential":
                wr.write(MAGIC + bytes([2]))
            else:
                g = quad * sum(v * v for v in payload)
                wr.write(MAGIC + bytes([0]) + struct.pack("<f", g))
        else:
            wr.write(MAGIC + bytes([4]))
        wr.flush()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--mode",
        default="echo",
        choices=["echo", "half", "scale", "decline-potential", "bad-magic", "truncate"],
    )
    ap.add_argument("--factor", type=float, default=0.5)
    ap.add_argument("--tcp", type=int, default=0, help="listen on 127.0.0.1:PORT")
    ap.add_argument(
        "--once", action="store_true", help="TCP: serve one connection then exit"
    )
    args = ap.parse_args()

    if args.tcp:
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind(("127.0.0.1", args.tcp))
        srv.listen(4)
        # advertise the bound port for port-0 callers
        print(srv.getsockname()[1], flush=True)
        while True:
            conn, _ = srv.accept()
            rd = conn.makefile("rb")
            wr = conn.makefile("wb")
            try:
                serve_stream(rd, wr, args)
            except EOFError:
                pass
            finally:
                conn.close()
            if args.once:
                return
    else:
        serve_stream(sys.stdin.buffer, sys.stdout.buffer, args)


if __name__ == "__main__":
    main()
