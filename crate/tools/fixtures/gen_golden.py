#!/usr/bin/env python3
"""Reference generator for the golden test fixtures.

Writes seeded NPW1 weight containers and the expected intermediate and
final outputs of the mask network for a short random input stream. The
forward pass here is an independent float64 numpy implementation; the Rust
test suite compares against it at a relative tolerance.

Usage: python3 tools/fixtures/gen_golden.py [output_dir]
Default output directory: crates/core/tests/fixtures
"""

import os
import struct
import sys

import numpy as np

TOLERANCE = 1e-4
FRAMES = 10

CASES = [
    # name, seed, weight range, (M, F, H, R, spatial layers, temporal layers)
    ("small", 7, 0.1, (2, 17, 8, 2, 4, 3)),
    ("paper", 11, 0.1, (5, 129, 96, 2, 4, 3)),
    # Wide weights keep every intermediate at order one.
    ("wide", 13, 1.0, (3, 33, 12, 3, 3, 2)),
]


def write_npw1(path, tensors):
    out = bytearray(b"NPW1")
    out += struct.pack("<II", 1, len(tensors))
    for name, arr in tensors:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<BB", 0, arr.ndim)
        out += struct.pack("<%dI" % arr.ndim, *arr.shape)
        out += arr.tobytes()
    with open(path, "wb") as f:
        f.write(bytes(out))


def make_weights(rng, hp, scale):
    m, f, h, r, ls, lt = hp
    if h % r:
        raise ValueError("hidden size %d not divisible by %d splits" % (h, r))
    u = lambda *shape: rng.uniform(-scale, scale, size=shape).astype(np.float32)
    c = 2 * m
    w = [("meta.hparams", np.array(hp, dtype=np.float32))]
    for l in range(ls):
        c_out = c + 1 if l == ls - 1 else c
        w.append(("spatial.%d.weight" % l, u(f, c_out, c)))
        w.append(("spatial.%d.prelu" % l, u(c_out)))
    w.append(("encoder.weight", u(h, f)))
    w.append(("encoder.bias", u(h)))
    s = h // r
    for l in range(lt):
        for k in range(r):
            p = "gru.%d.split%d" % (l, k)
            w.append((p + ".w_ih", u(3 * s, s)))
            w.append((p + ".w_hh", u(3 * s, s)))
            w.append((p + ".bias", u(3 * s)))
    w.append(("decoder.weight", u(f, h)))
    w.append(("decoder.bias", u(f)))
    for name in ("p_a", "p_b", "beta0", "alpha0_ss", "alpha0_nn"):
        w.append(("controls." + name, u(f)))
    return w


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_step(x, h, w_ih, w_hh, b):
    s = h.shape[0]
    gi = w_ih @ x
    gh = w_hh @ h
    r = sigmoid(gi[:s] + gh[:s] + b[:s])
    z = sigmoid(gi[s:2 * s] + gh[s:2 * s] + b[s:2 * s])
    n = np.tanh(gi[2 * s:] + b[2 * s:] + r * gh[2 * s:])
    return (1.0 - z) * n + z * h


def forward(weights, hp, y_re, y_im):
    """y_re, y_im: [T, M, F]. Returns dict of golden arrays."""
    w = {k: v.astype(np.float64) for k, v in weights}
    m, f, h, r, ls, lt = hp
    s = h // r
    T = y_re.shape[0]
    state = [[np.zeros(s) for _ in range(r)] for _ in range(lt)]
    out = {k: [] for k in ("spatial_out", "temporal_in", "gru_out", "mask.re", "mask.im")}
    for t in range(T):
        # features [F, 2M]: even = real, odd = imaginary part of each mic
        a = np.empty((f, 2 * m))
        a[:, 0::2] = y_re[t].T
        a[:, 1::2] = y_im[t].T
        for l in range(ls):
            z = np.einsum("foi,fi->fo", w["spatial.%d.weight" % l], a)
            slope = w["spatial.%d.prelu" % l]
            a = np.where(z >= 0, z, slope[None, :] * z)
        spatial = a[:, : 2 * m]
        extra = a[:, 2 * m]
        x = w["encoder.weight"] @ extra + w["encoder.bias"]
        for l in range(lt):
            concat = []
            for k in range(r):
                p = "gru.%d.split%d" % (l, k)
                state[l][k] = gru_step(
                    x[k * s:(k + 1) * s], state[l][k],
                    w[p + ".w_ih"], w[p + ".w_hh"], w[p + ".bias"])
                concat.append(state[l][k])
            concat = np.concatenate(concat)
            x = np.empty(h)
            for k in range(h):
                x[(k % r) * s + k // r] = concat[k]
        mask = w["decoder.weight"] @ x + w["decoder.bias"]
        out["spatial_out"].append(spatial.T)
        out["temporal_in"].append(extra)
        out["gru_out"].append(x)
        out["mask.re"].append((mask[:, None] * spatial[:, 0::2]).T)
        out["mask.im"].append((mask[:, None] * spatial[:, 1::2]).T)
    return {k: np.array(v) for k, v in out.items()}


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "..", "crates", "core", "tests", "fixtures")
    os.makedirs(out_dir, exist_ok=True)
    for name, seed, scale, hp in CASES:
        rng = np.random.Generator(np.random.PCG64(seed))
        weights = make_weights(rng, hp, scale)
        m, f = hp[0], hp[1]
        y_re = rng.uniform(-1.0, 1.0, size=(FRAMES, m, f)).astype(np.float32)
        y_im = rng.uniform(-1.0, 1.0, size=(FRAMES, m, f)).astype(np.float32)
        golden = forward(weights, hp, y_re.astype(np.float64), y_im.astype(np.float64))
        write_npw1(os.path.join(out_dir, "golden_%s_weights.npw1" % name), weights)
        tensors = [
            ("meta.seed", np.array([seed], dtype=np.float32)),
            ("meta.tolerance", np.array([TOLERANCE], dtype=np.float32)),
            ("input.re", y_re),
            ("input.im", y_im),
        ] + [(k, golden[k]) for k in ("spatial_out", "temporal_in", "gru_out", "mask.re", "mask.im")]
        write_npw1(os.path.join(out_dir, "golden_%s.npw1" % name), tensors)
        print("wrote case %s (seed %d)" % (name, seed))


if __name__ == "__main__":
    main()
