"""Adaptive Runge-Kutta-Fehlberg 4(5) integration.

:func:`integrate` solves a single autonomous initial value problem.
:func:`integrate_batch` advances many independent problems that share a
vector field; every row keeps its own step size and stopping state, so a
row's trajectory is identical whether it is integrated alone or in a batch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError, NumericalError

__all__ = [
    "Termination",
    "SolverOptions",
    "IvpProblem",
    "Trajectory",
    "integrate",
    "integrate_batch",
]

# Fehlberg tableau
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    MAX_STEPS = "max_steps"
    STEP_UNDERFLOW = "step_underflow"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class SolverOptions:
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    h_init: float = 1e-2
    h_min: float = 1e-10
    h_max: float = 1.0
    max_steps: int = 10_000

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise InputError("tolerances must be positive")
        if not 0 < self.h_min <= self.h_init <= self.h_max:
            raise InputError("step sizes must satisfy 0 < h_min <= h_init <= h_max")
        if self.max_steps < 1:
            raise InputError("max_steps must be positive")


@dataclass
class IvpProblem:
    """Autonomous IVP ``dy/dt = vector_field(y)``, ``y(0) = initial_state``.

    ``stop_test(state, derivative)`` is checked at the initial state and after
    every accepted step. If ``t_end`` is given the last step is shortened to
    land on it exactly and reaching it counts as convergence.
    """

    vector_field: Callable[[np.ndarray], np.ndarray]
    initial_state: np.ndarray
    stop_test: Optional[Callable[[np.ndarray, np.ndarray], bool]] = None
    options: SolverOptions = field(default_factory=SolverOptions)
    t_end: Optional[float] = None


@dataclass
class Trajectory:
    """Accepted states only, starting with the initial state."""

    states: np.ndarray
    times: np.ndarray
    terminated: Termination
    error: Optional[str] = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.states)


def _row_norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", v, v))


def integrate_batch(
    vector_field: Callable[[np.ndarray], np.ndarray],
    initial_states,
    stop_test: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    options: SolverOptions = SolverOptions(),
    t_end: Optional[float] = None,
    on_error: str = "raise",
    record: bool = True,
) -> list[Trajectory]:
    """Integrate ``m`` independent problems sharing one vector field.

    Parameters
    ----------
    vector_field : callable
        Maps an ``(k, D)`` array of states to ``(k, D)`` derivatives.
    initial_states : array_like, shape (m, D)
    stop_test : callable, optional
        Maps ``(states, derivatives)`` of shape ``(k, D)`` to a boolean mask.
    on_error : {"raise", "flag"}
        Non-finite derivatives either raise :class:`NumericalError` or mark
        the row ``NUMERICAL_ERROR`` and stop it.
    record : bool
        Keep every accepted state; otherwise only the first and last.
    """
    y = np.array(initial_states, dtype=np.float64, copy=True)
    if y.ndim != 2:
        raise InputError("initial_states must be an (m, D) array")
    m, dim = y.shape
    opts = options

    t = np.zeros(m)
    h = np.full(m, opts.h_init)
    attempts = np.zeros(m, dtype=np.int64)
    status = np.full(m, None, dtype=object)
    errors: list[Optional[str]] = [None] * m
    hist_y = [[y[i].copy()] for i in range(m)]
    hist_t = [[0.0] for _ in range(m)]

    def evaluate(rows, states):
        k = np.asarray(vector_field(states), dtype=np.float64).reshape(len(rows), dim)
        bad = ~np.all(np.isfinite(k), axis=1)
        if np.any(bad):
            first = int(np.flatnonzero(bad)[0])
            if on_error == "raise":
                raise NumericalError("non-finite derivative", point=states[first])
            for j in np.flatnonzero(bad):
                status[rows[j]] = Termination.NUMERICAL_ERROR
                errors[rows[j]] = "non-finite derivative"
        return k, bad

    rows = np.arange(m)
    k1 = np.zeros_like(y)
    k1_rows, bad = evaluate(rows, y)
    k1[:] = k1_rows
    ok = rows[~bad]
    if stop_test is not None and ok.size:
        hit = np.asarray(stop_test(y[ok], k1[ok]), dtype=bool)
        for i in ok[hit]:
            status[i] = Termination.CONVERGED
    if t_end is not None:
        for i in rows:
            if status[i] is None and t_end <= 0.0:
                status[i] = Termination.CONVERGED

    while True:
        active = np.array([i for i in range(m) if status[i] is None], dtype=np.int64)
        if active.size == 0:
            break
        ya = y[active]
        ha = h[active].copy()
        if t_end is not None:
            ha = np.minimum(ha, t_end - t[active])
        ks = [k1[active]]
        failed = np.zeros(active.size, dtype=bool)
        for s in range(1, 6):
            incr = sum(_A[s][j] * ks[j] for j in range(s))
            stage_y = ya + ha[:, None] * incr
            ks_s, bad = evaluate(active, stage_y)
            failed |= bad
            ks.append(ks_s)
        y4 = ya + ha[:, None] * sum(_B4[j] * ks[j] for j in range(6))
        y5 = ya + ha[:, None] * sum(_B5[j] * ks[j] for j in range(6))
        err = _row_norm(y5 - y4)
        tol = opts.abs_tol + opts.rel_tol * _row_norm(ya)
        attempts[active] += 1
        with np.errstate(divide="ignore"):
            factor = np.where(err > 0, 0.9 * (tol / np.where(err > 0, err, 1.0)) ** 0.2, 5.0)
        factor = np.clip(factor, 0.2, 5.0)
        accept = (err <= tol) & ~failed & np.all(np.isfinite(y5), axis=1)

        acc_rows = active[accept]
        if acc_rows.size:
            y_new = y5[accept]
            y[acc_rows] = y_new
            t[acc_rows] += ha[accept]
            k_new, bad = evaluate(acc_rows, y_new)
            k1[acc_rows] = k_new
            for j, i in enumerate(acc_rows):
                if not record:
                    del hist_y[i][1:], hist_t[i][1:]
                hist_y[i].append(y_new[j].copy())
                hist_t[i].append(t[i])
            good = acc_rows[~bad]
            if stop_test is not None and good.size:
                hit = np.asarray(stop_test(y[good], k1[good]), dtype=bool)
                for i in good[hit]:
                    status[i] = Termination.CONVERGED
            if t_end is not None:
                for i in good:
                    if status[i] is None and t[i] >= t_end * (1 - 1e-14):
                        status[i] = Termination.CONVERGED

        h_next = ha * factor
        h[active] = np.minimum(h_next, opts.h_max)
        for j, i in enumerate(active):
            if status[i] is not None:
                continue
            if failed[j]:
                status[i] = Termination.NUMERICAL_ERROR
            elif h[i] < opts.h_min:
                status[i] = Termination.STEP_UNDERFLOW
            elif attempts[i] >= opts.max_steps:
                status[i] = Termination.MAX_STEPS

    out = []
    for i in range(m):
        states = np.array(hist_y[i])
        times = np.array(hist_t[i])
        out.append(Trajectory(states=states, times=times, terminated=status[i], error=errors[i]))
    return out


def integrate(problem: IvpProblem) -> Trajectory:
    """Integrate a single problem; see :func:`integrate_batch` for the scheme.

    The step is accepted when ``|y5 - y4| <= abs_tol + rel_tol * |y|`` and the
    fifth-order solution is propagated. The next step is scaled by
    ``0.9 * (tol / err) ** (1/5)`` clamped to ``[0.2, 5]``.
    """
    y0 = np.atleast_1d(np.asarray(problem.initial_state, dtype=np.float64))
    if y0.ndim != 1:
        raise InputError("initial_state must be a vector")
    f = problem.vector_field

    def field_batch(states):
        return np.asarray(f(states[0]), dtype=np.float64).reshape(1, -1)

    stop = None
    if problem.stop_test is not None:
        def stop(states, derivs):
            return np.array([bool(problem.stop_test(states[0], derivs[0]))])

    return integrate_batch(
        field_batch, y0[None, :], stop, problem.options, t_end=problem.t_end
    )[0]
