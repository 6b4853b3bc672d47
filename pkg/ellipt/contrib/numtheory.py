#  Licensed under the Apache License, Version 2.0 (the "License"); you may
#  not use this file except in compliance with the License. You may obtain
#  a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#  WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#  License for the specific language governing permissions and limitations
#  under the License.

"""

Small integer and torus helpers shared by the resonance, period and orbit
modules.

Fractional parts follow the centered convention: wrap(y) lies in
[-1/2, 1/2) and y - wrap(y) is an integer.

"""

import math
import logging
import functools

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "wrap",
    "dist_to_int",
    "dist_to_2pi",
    "gcd_list",
    "lcm_list",
    "extended_gcd",
    "normalize_relation",
    "orthogonal_lattice_basis",
    "l1_ball",
]


def wrap(y):
    """Centered fractional part, elementwise, with values in [-1/2, 1/2)."""
    y = np.asarray(y, dtype=float)
    return y - np.floor(y + 0.5)


def dist_to_int(y):
    return np.abs(wrap(y))


def dist_to_2pi(y):
    """Distance of y from the lattice 2*pi*Z."""
    return 2 * math.pi * dist_to_int(np.asarray(y, dtype=float) /
                                     (2 * math.pi))


def gcd_list(values):
    values = [abs(int(v)) for v in values]
    if not values:
        return 0
    return functools.reduce(math.gcd, values)


def lcm_list(values):
    def _lcm(a, b):
        if a == 0 or b == 0:
            return 0
        return abs(a * b) // math.gcd(a, b)
    values = [abs(int(v)) for v in values]
    if not values:
        return 1
    return functools.reduce(_lcm, values)


def extended_gcd(a, b):
    """Return (g, x, y) with x*a + y*b == g and g >= 0."""
    old_r, r = int(a), int(b)
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def normalize_relation(M, a):
    """Divide (M, a) by their common gcd, keeping M positive."""
    g = gcd_list([M] + list(a))
    if g == 0:
        return M, tuple(a)
    sign = -1 if M < 0 else 1
    return sign * M // g, tuple(sign * int(x) // g for x in a)


def orthogonal_lattice_basis(k):
    """Basis of the integer lattice {v in Z^n : v . k = 0}.

    Column operations reduce k to (g, 0, ..., 0) with a unimodular matrix U;
    the last n - 1 columns of U span the orthogonal lattice. Each vector is
    signed so that its first nonzero entry is positive.
    """
    k = [int(x) for x in k]
    n = len(k)
    if n == 0:
        return []
    U = np.eye(n, dtype=np.int64)
    r0 = k[0]
    for i in range(1, n):
        ri = k[i]
        if r0 == 0 and ri == 0:
            continue
        g, x, y = extended_gcd(r0, ri)
        col0 = x * U[:, 0] + y * U[:, i]
        coli = (-ri // g) * U[:, 0] + (r0 // g) * U[:, i]
        U[:, 0], U[:, i] = col0, coli
        r0 = g
    basis = []
    for i in range(1, n):
        v = [int(x) for x in U[:, i]]
        first = next((x for x in v if x != 0), 0)
        if first < 0:
            v = [-x for x in v]
        basis.append(tuple(v))
    return basis


def l1_ball(dim, radius):
    """All integer vectors of the given dimension with |v|_1 <= radius.

    Vectors come out in lexicographic order as an (N, dim) int array.
    """
    if dim == 0:
        return np.zeros((1, 0), dtype=np.int64)
    axes = [np.arange(-radius, radius + 1)] * dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    grid = grid.reshape(-1, dim)
    return grid[np.abs(grid).sum(axis=1) <= radius]
