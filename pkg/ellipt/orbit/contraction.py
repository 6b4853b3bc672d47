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

Fixed point iteration x = L(P(x)) in a sup-norm ball.

Before iterating, the map is checked to be a contraction on the ball of
radius delta0 = 2 |L(P(0))|: first a priori, from the Lipschitz constant of
P measured by finite differences times the bound on |L|, and if that is not
available or too weak, from the measured Lipschitz constant of L o P
itself. Iterates are then followed until the step drops below the stopping
tolerance.

"""

import logging
from collections import namedtuple

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "ContractionRefusedError",
    "ContractionDivergedError",
    "ContractionResult",
    "ContractionConstant",
    "contraction_constant",
    "sup",
    "contraction_solve",
]

RATIO_LIMIT = 0.5


class ContractionRefusedError(Exception):

    def __init__(self, residual, delta0, lipschitz, L_norm=None):
        super().__init__(
            "Not a contraction on the ball of radius {:.3e}: |L P(0)| = "
            "{:.3e}, Lipschitz ratio {:.3e}, |L| <= {}".format(
                delta0, residual, lipschitz, L_norm))
        self._lipschitz = lipschitz

    @property
    def lipschitz(self):
        return self._lipschitz


class ContractionDivergedError(Exception):

    def __init__(self, iterations, last_step):
        super().__init__(
            "Fixed point iteration diverged after {} steps (last step "
            "{:.3e})".format(iterations, last_step))
        self._iterations = iterations
        self._last_step = last_step

    @property
    def iterations(self):
        return self._iterations

    @property
    def last_step(self):
        return self._last_step


class ContractionResult(namedtuple("ContractionResult",
                                   ["x", "iterations", "steps", "delta0",
                                    "lipschitz", "a_priori"])):
    """Fixed point with the step sizes seen on the way; a_priori tells
    whether |DP| |L| <= 1/2 was established or only the measured ratio of
    L o P."""

    __slots__ = ()

    @property
    def contraction_ratio(self):
        ratios = [b / a for a, b in zip(self.steps, self.steps[1:]) if a]
        return max(ratios) if ratios else 0.0


def sup(x):
    x = np.asarray(x)
    return float(np.abs(x).max()) if x.size else 0.0


def _default_point(rng, x0, radius):
    v = rng.uniform(-1.0, 1.0, x0.shape)
    if np.iscomplexobj(x0):
        v = v + 1j * rng.uniform(-1.0, 1.0, x0.shape)
    return radius * v / max(sup(v), 1e-300)


def _lipschitz(fn, rng, x0, radius, samples, random_point, rel_step=1e-4):
    """Largest |fn(x + h) - fn(x)| / |h| over seeded points of the ball."""
    worst = 0.0
    for _ in range(samples):
        x = random_point(rng, x0, radius * rng.uniform(0.0, 1.0))
        h = random_point(rng, x0, radius * rel_step)
        size = sup(h)
        if size == 0:
            continue
        worst = max(worst, sup(fn(x + h) - fn(x)) / size)
    return worst


class ContractionConstant(namedtuple("ContractionConstant",
                                     ["lipschitz", "a_priori", "radius"])):
    """Lipschitz ratio of L o P established on the ball of the given
    radius."""

    __slots__ = ()


def contraction_constant(P, L, x0, delta0, residual=0.0, L_norm=None,
                         samples=10, seed=0, random_point=None, margin=0.1):
    """Check that L o P contracts the ball of radius delta0 around x0.

    The a priori ratio |DP| |L| is tried first when |L| is known. Otherwise,
    or when it exceeds 1/2, the ratio of L o P is measured directly.
    """
    x0 = np.asarray(x0)
    rng = np.random.default_rng(seed)
    random_point = random_point or _default_point
    if L_norm is not None:
        lip_P = _lipschitz(P, rng, x0, delta0, samples, random_point)
        if lip_P * L_norm <= RATIO_LIMIT:
            return ContractionConstant(lip_P * L_norm, True, delta0)
    measured = _lipschitz(lambda x: L(P(x)), rng, x0, delta0, samples,
                          random_point)
    if measured > RATIO_LIMIT * (1 + margin):
        raise ContractionRefusedError(residual, delta0, measured, L_norm)
    if L_norm is not None:
        logger.warning("A priori bound |DP| |L| = {:.3e} too weak, using "
                       "measured ratio {:.3e}".format(lip_P * L_norm,
                                                      measured))
    return ContractionConstant(measured, False, delta0)


def contraction_solve(P, L, x0, delta0=None, L_norm=None, max_iter=200,
                      stop_tol=1e-12, samples=10, seed=0, random_point=None,
                      margin=0.1, constant=None):
    """Solve x = L(P(x)) starting from x0 (the zero of the space).

    A constant from an earlier solve is reused when its ball contains the
    one needed here; otherwise the ratio is established afresh.
    """
    x0 = np.asarray(x0)
    first = L(P(x0))
    residual = sup(first - x0)
    if residual == 0.0:
        logger.debug("P(0) vanishes, zero is the fixed point")
        return ContractionResult(first, 1, [0.0], 0.0, 0.0, True)
    if delta0 is None:
        delta0 = 2 * residual
    elif delta0 < 2 * residual:
        raise ContractionRefusedError(residual, delta0, float("nan"),
                                      L_norm)
    if constant is None or constant.radius < delta0:
        constant = contraction_constant(P, L, x0, delta0, residual, L_norm,
                                        samples, seed, random_point, margin)
    lipschitz, a_priori = constant.lipschitz, constant.a_priori
    x = first
    steps = [residual]
    rising = 0
    for iteration in range(2, max_iter + 1):
        new = L(P(x))
        step = sup(new - x)
        steps.append(step)
        x = new
        if sup(x) > delta0 * (1 + margin):
            raise ContractionDivergedError(iteration, step)
        if step <= stop_tol * max(1.0, sup(x)):
            logger.debug("Fixed point after {} iterations (ratio "
                         "{:.3e})".format(iteration, lipschitz))
            return ContractionResult(x, iteration, steps, delta0,
                                     lipschitz, a_priori)
        rising = rising + 1 if step > steps[-2] else 0
        if rising >= 3:
            raise ContractionDivergedError(iteration, step)
    raise ContractionDivergedError(max_iter, steps[-1])
