"""Writes the small PPPW1 fixture and its reference forward output.

The forward pass here is written with numpy padding and einsum, independently
of the Rust loops. Run from the repository root:

    python3 tools/make_golden_pppw1.py
"""

import struct
from pathlib import Path

import numpy as np

OUT = Path("crates/core/tests/data")
SEED = 20240611
WIDTH = 16
DEPTH = 8
ROWS, COLS = 32, 32
SIGMA = 0.1


def build_layers(rng):
    chans = [9] + [WIDTH] * (DEPTH - 1) + [8]
    layers = []
    for i in range(DEPTH):
        cin, cout = chans[i], chans[i + 1]
        scale = np.sqrt(2.0 / (9 * cin))
        w = (rng.standard_normal((cout, cin, 3, 3)) * scale).astype(np.float32)
        b = (rng.standard_normal(cout) * 0.05).astype(np.float32)
        act = 1 if i == DEPTH - 1 else 0
        layers.append((cin, cout, act, w, b))
    return layers


def write_pppw1(path, layers):
    with open(path, "wb") as f:
        f.write(b"PPPW1")
        f.write(struct.pack("<I", len(layers)))
        for cin, cout, act, w, b in layers:
            f.write(struct.pack("<IIIB", cin, cout, 3, act))
            f.write(w.astype("<f4").tobytes(order="C"))
            f.write(b.astype("<f4").tobytes(order="C"))


def conv(x, w, b, act):
    h, wd, _ = x.shape
    p = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    w = w.astype(np.float64)
    y = np.zeros((h, wd, w.shape[0]))
    for ky in range(3):
        for kx in range(3):
            y += np.einsum("ijc,oc->ijo", p[ky:ky + h, kx:kx + wd, :], w[:, :, ky, kx])
    y += b.astype(np.float64)
    return {0: np.maximum(y, 0.0), 1: np.tanh(y), 2: y}[act]


def forward(layers, z, sigma):
    r, c, _ = z.shape
    # (2i+a, 2j+b, ch) -> (i, j, 4ch+2a+b)
    sub = z.reshape(r // 2, 2, c // 2, 2, 2).transpose(0, 2, 4, 1, 3).reshape(r // 2, c // 2, 8)
    x = np.concatenate([sub, np.full((r // 2, c // 2, 1), sigma)], axis=2)
    for _, _, act, w, b in layers:
        x = conv(x, w, b, act)
    return x.reshape(r // 2, c // 2, 2, 2, 2).transpose(0, 3, 1, 4, 2).reshape(r, c, 2)


def main():
    rng = np.random.default_rng(SEED)
    layers = build_layers(rng)
    z = rng.uniform(-1.0, 1.0, (ROWS, COLS, 2))
    out = forward(layers, z, SIGMA)
    OUT.mkdir(parents=True, exist_ok=True)
    write_pppw1(OUT / "golden_small.pppw1", layers)
    np.savetxt(OUT / "golden_input.txt", z.reshape(-1), fmt="%.17g")
    np.savetxt(OUT / "golden_output.txt", out.reshape(-1), fmt="%.17g")
    print("parameters:", sum(w.size + b.size for *_, w, b in layers))
    print("output range:", out.min(), out.max())


if __name__ == "__main__":
    main()
