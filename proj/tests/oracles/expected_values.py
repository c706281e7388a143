# Copyright 2026 The CacheJoin Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent recomputation of the fixed numeric expectations in the unit
tests. Uses exact rational arithmetic; shares no code with the library.

Run:  python3 tests/oracles/expected_values.py
The printed values are frozen into the C++ tests; rerun after changing any
input below and update the tests only if the recomputation changes.
"""

from fractions import Fraction as F
import math

MiB = 1 << 20
V_R, V_S, Q_ENTRY, FUDGE = 120, 20, 4, 8


def budget(total, d_b, n_buffers, h_r, i_b_bytes):
    i_b = i_b_bytes // V_S
    remainder = total - (n_buffers * d_b + h_r) * V_R - i_b * V_S
    # AUTO alpha: table and queue get equal record capacity.
    per_record = FUDGE * V_S + Q_ENTRY
    h_s = remainder // per_record
    slack = remainder - h_s * per_record
    return i_b, h_s, slack


def c_loop(c_io, d_b, c_h, c_f, w_s, stream_sum, w_n, cache_sum, op):
    io = F(c_io, 2) if op else F(c_io)
    return (io + d_b * (c_h + c_f) + w_s * stream_sum + w_n * cache_sum) / F(10**9)


def main():
    print("disk_buffer_bytes(P, d_B=850) =", 850 * V_R)
    print("disk_buffer_bytes(OP, d_B=850) =", 2 * 850 * V_R)
    print("i_b records for 2 MiB =", (2 * MiB) // V_S)
    print("stream buffer records for 52428 B =", 52428 // V_S)
    i_b, h_s, slack = budget(50 * MiB, 850, 1, 8738, 2 * MiB)
    print("M=50MiB budget: i_b =", i_b, " h_s = q_cap =", h_s, " slack =", slack)

    p = c_loop(10**7, 850, 100, 50, 1000, 500, 2000, 300, op=False)
    op = c_loop(10**7, 850, 100, 50, 1000, 500, 2000, 300, op=True)
    print("c_loop P  =", float(p))
    print("c_loop OP =", float(op))
    print("mu(2000, 1000, P) =", float(F(3000) / p))
    print("degenerate c_loop P (w=0) =", float(c_loop(10**7, 850, 100, 50, 0, 500, 0, 300, False)))

    h3 = sum(F(1, k) for k in range(1, 4))
    print("zipf_probability(1, 1.0, 3) =", F(1) / h3, "=", float(F(1) / h3))

    # Chi-square 0.99 quantile for 99 degrees of freedom, Wilson-Hilferty.
    k, z = 99, 2.3263478740408408
    print("chi2_0.99(99) ~", k * (1 - 2 / (9 * k) + z * math.sqrt(2 / (9 * k))) ** 3)


if __name__ == "__main__":
    main()
