#!/usr/bin/env python3
# Copyright 2026 The nsk Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Independent oracles for the frozen expected values in the C++ tests.

Nothing here imports or calls the C++ code. Run it to regenerate the numbers
pasted into tests/test_*.cpp:

    python3 tests/oracles/derive_expected.py
"""
import hashlib
import math
import struct


class MT19937_64:
    """Reference 64-bit Mersenne Twister (matches std::mt19937_64)."""

    def __init__(self, seed):
        self.mt = [0] * 312
        self.index = 312
        self.mt[0] = seed & 0xFFFFFFFFFFFFFFFF
        for i in range(1, 312):
            prev = self.mt[i - 1]
            self.mt[i] = (6364136223846793005 * (prev ^ (prev >> 62)) + i) & 0xFFFFFFFFFFFFFFFF

    def _twist(self):
        upper, lower = 0xFFFFFFFF80000000, 0x7FFFFFFF
        for i in range(312):
            x = (self.mt[i] & upper) | (self.mt[(i + 1) % 312] & lower)
            xa = x >> 1
            if x & 1:
                xa ^= 0xB5026F5AA96619E9
            self.mt[i] = self.mt[(i + 156) % 312] ^ xa
        self.index = 0

    def next(self):
        if self.index >= 312:
            self._twist()
        y = self.mt[self.index]
        self.index += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & 0xFFFFFFFFFFFFFFFF


def uniform(rng):
    return (rng.next() >> 11) * 2.0 ** -53


def index(rng, n):
    m = 2 ** 64 - 1
    limit = m - m % n
    x = rng.next()
    while x >= limit:
        x = rng.next()
    return x % n


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def relu(v):
    return [max(0.0, x) for x in v]


def matvec(w, x, b):
    return [sum(wi * xi for wi, xi in zip(row, x)) + bi for row, bi in zip(w, b)]


def toy_forward():
    # Hand-set toy profile 4 -> 4 -> 4 -> 8, K = 2, D = 4.
    x = [1.0, -2.0, 0.5, 3.0]
    w1 = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    b1 = [0.5, -1.0, 0.0, 0.25]
    w2 = [[1, 0, 0, 0], [0, 2, 0, 0], [0, 0, -1, 0], [1, 1, 1, 1]]
    b2 = [0.0, 0.0, 0.5, -0.25]
    w3 = [[(i + 1) * (1 if j % 2 == 0 else -1) / 4.0 for j in range(4)] for i in range(8)]
    b3 = [0.1 * i for i in range(8)]
    h1 = relu(matvec(w1, x, b1))
    h2 = relu(matvec(w2, h1, b2))
    return matvec(w3, h2, b3)


def ddim_scalar():
    x_t, eps, a_t, a_prev = 1.0, 0.5, 0.25, 0.81
    x0 = (x_t - math.sqrt(1 - a_t) * eps) / math.sqrt(a_t)
    return math.sqrt(a_prev) * x0 + math.sqrt(1 - a_prev) * eps


def nstf_bytes(shape, values):
    out = b"NSTF" + struct.pack("<HBB", 1, 0, len(shape))
    out += b"".join(struct.pack("<I", s) for s in shape)
    out += b"".join(struct.pack("<f", v) for v in values)
    return out


def random_name_file_sha256():
    # 8 x 2048 values, uniform(-1, 1) from seed 2024, rounded to f32.
    rng = MT19937_64(2024)
    vals = [f32(-1.0 + 2.0 * uniform(rng)) for _ in range(8 * 2048)]
    return hashlib.sha256(nstf_bytes([8, 2048], vals)).hexdigest()


def block_faces():
    # n = 50 rows of width 3: five blocks of ten rows. Block b has direction
    # e_(b % 3) plus a per-row perturbation so cosines differ.
    rows = []
    for i in range(50):
        b = i // 10
        v = [0.1 * ((i * 7 + k * 3) % 5) for k in range(3)]
        v[b % 3] += 1.0 + 0.5 * b
        if b >= 3:
            v[(b + 1) % 3] -= 0.75
        rows.append([f32(c) for c in v])
    return rows


def id_consistency(rows, seed):
    rng = MT19937_64(seed)
    n = len(rows)
    total = 0.0
    for i in range(n):
        j = index(rng, n - 1)
        if j >= i:
            j += 1
        a, b = rows[i], rows[j]
        dot = sum(x * y for x, y in zip(a, b))
        total += dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))
    return total / n


if __name__ == "__main__":
    r = MT19937_64(5489)
    for _ in range(9999):
        r.next()
    print("mt19937_64(5489) 10000th:", r.next())
    print("toy_forward:", ["%.17g" % v for v in toy_forward()])
    print("ddim_scalar: %.17g" % ddim_scalar())
    print("sha256(random 8x2048, seed 2024):", random_name_file_sha256())
    faces = block_faces()
    for seed in (7, 11):
        print("id_consistency(block, seed=%d): %.17g" % (seed, id_consistency(faces, seed)))
