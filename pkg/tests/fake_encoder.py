#!/usr/bin/env python3
"""Stand-in for an ffmpeg binary, for exercising the external-codec plumbing.

Understands the two command shapes the toolkit issues. "Encoding" stores
the raw frames quantized with a step that grows with -crf; "decoding"
writes them back as raw rgb24 on stdout. FAKE_ENCODER_FAIL=1 makes it exit 1,
FAKE_ENCODER_DROP=1 drops the last frame.
"""
import os
import sys

import numpy as np


def arg(argv, flag):
    return argv[argv.index(flag) + 1]


def main(argv):
    if os.environ.get("FAKE_ENCODER_FAIL"):
        sys.stderr.write("fake encoder: forced failure\n")
        return 1
    if "-crf" in argv:
        w, h = (int(v) for v in arg(argv, "-s").split("x"))
        crf = int(arg(argv, "-crf"))
        frames = np.frombuffer(sys.stdin.buffer.read(), dtype=np.uint8).reshape(-1, h, w, 3)
        step = 1 + crf // 4
        q = (np.round(frames.astype(float) / step) * step).clip(0, 255).astype(np.uint8)
        if os.environ.get("FAKE_ENCODER_DROP"):
            q = q[:-1]
        with open(argv[-1], "wb") as fh:
            fh.write(np.array([len(q), h, w], dtype=np.int32).tobytes())
            fh.write(q.tobytes())
        return 0
    with open(arg(argv, "-i"), "rb") as fh:
        data = fh.read()
    sys.stdout.buffer.write(data[12:])
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
