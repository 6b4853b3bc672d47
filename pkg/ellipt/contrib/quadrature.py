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

Quadrature on uniform time grids.

scipy integrates real data only, so complex samples are split into real and
imaginary parts. All helpers integrate along axis 0.

"""

import math

import numpy as np
from scipy import integrate

__all__ = [
    "time_grid",
    "grid_size",
    "simpson",
    "cumulative_simpson",
    "sup_norm",
]


def grid_size(T, max_frequency, samples_per_period=64, min_samples=256):
    """Number of subintervals resolving the fastest frequency over [0, T].

    Always even, since composite Simpson rules prefer an even count.
    """
    N = int(math.ceil(samples_per_period * abs(T) * max_frequency /
                      (2 * math.pi)))
    N = max(min_samples, N)
    return N + (N % 2)


def time_grid(T, N):
    return np.linspace(0.0, T, N + 1)


def _split(fn, y, t, **kwargs):
    y = np.asarray(y)
    if np.iscomplexobj(y):
        return (fn(y.real, x=t, axis=0, **kwargs) +
                1j * fn(y.imag, x=t, axis=0, **kwargs))
    return fn(y, x=t, axis=0, **kwargs)


def simpson(y, t):
    return _split(integrate.simpson, y, t)


def cumulative_simpson(y, t):
    """Running integral from t[0], with a zero first sample."""
    y = np.asarray(y)
    if y.shape[0] < 3:
        return _split(integrate.cumulative_trapezoid, y, t, initial=0)
    return _split(integrate.cumulative_simpson, y, t, initial=0)


def sup_norm(*arrays):
    """Largest absolute entry over all given arrays (0 for empty input)."""
    best = 0.0
    for arr in arrays:
        arr = np.asarray(arr)
        if arr.size:
            best = max(best, float(np.max(np.abs(arr))))
    return best
