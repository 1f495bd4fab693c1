"""Closed-form scalars for the recovery analysis.

Natural logarithms throughout.  Everything here is a deterministic
function of its arguments; the only sampling lives in
`run_bound_checks`, which estimates tail probabilities to confirm the
closed-form bounds dominate them.

The asymptotic growth conditions are reported as raw scalars for trend
analysis, never as pass/fail booleans: they are limits statements and
have no finite-sample truth value.
"""

from __future__ import annotations

import math
from collections import namedtuple
from typing import Optional, Sequence

import numpy as np

from .ensemble import SparseMeasurementMatrix
from .errors import ParameterError

GAMMA_RULES = ("sixth_root", "log_over_sqrt")


def _log_gap(p: int, k: int) -> float:
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    if p - k < 2:
        raise ParameterError(f"need p - k >= 2 so log(p - k) is positive, got p - k = {p - k}")
    return math.log(p - k)


def _loglog_gap(p: int, k: int) -> float:
    log_gap = _log_gap(p, k)
    if log_gap <= 1.0:
        raise ParameterError(f"need p - k >= 3 so log log(p - k) is positive, got p - k = {p - k}")
    return math.log(log_gap)


def control_parameter(n: int, p: int, k: int) -> float:
    """theta = n / (2 k log(p - k)); recovery transitions near theta = 1."""
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    return n / (2.0 * k * _log_gap(p, k))


def required_sample_size(p: int, k: int, eps: float = 0.0) -> int:
    """Smallest n strictly greater than (2 + eps) k log(p - k)."""
    if eps < 0:
        raise ParameterError(f"eps must be non-negative, got {eps!r}")
    return math.floor((2.0 + eps) * k * _log_gap(p, k)) + 1


def clamp_unit(value: float) -> tuple[float, bool]:
    """Clamp a schedule value into (0, 1]; flags when clamping happened."""
    if value > 1.0:
        return 1.0, True
    return value, False


GammaSchedule = namedtuple("GammaSchedule", ["value", "clamped"])


def gamma_schedule(p: int, k: int, rule: str) -> GammaSchedule:
    """Sparsification level as a function of problem shape.

    * sixth_root: (log log(p-k) / log(p-k))^(1/6), the slowest decay the
      recovery guarantee tolerates.
    * log_over_sqrt: 0.5 log(p-k) / sqrt(p-k), a much more aggressive
      decay used for the phase-transition experiments.
    """
    if rule == "sixth_root":
        value = (_loglog_gap(p, k) / _log_gap(p, k)) ** (1.0 / 6.0)
    elif rule == "log_over_sqrt":
        value = 0.5 * _log_gap(p, k) / math.sqrt(p - k)
    else:
        raise ParameterError(f"rule must be one of {GAMMA_RULES}, got {rule!r}")
    clamped_value, clamped = clamp_unit(value)
    return GammaSchedule(value=clamped_value, clamped=clamped)


def lambda_schedule(n: int, p: int, k: int) -> float:
    """Regularization weight sqrt((log(p-k)/n) * sqrt(log(p-k)/loglog(p-k)))."""
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    log_gap = _log_gap(p, k)
    loglog_gap = _loglog_gap(p, k)
    return math.sqrt(log_gap / n * math.sqrt(log_gap / loglog_gap))


ConditionReport = namedtuple("ConditionReport", ["q1", "q2", "q3"])


def recovery_conditions(n: int, p: int, k: int, gamma: float, lam: float, beta_min: float) -> ConditionReport:
    """The three scalars whose joint divergence/vanishing drives recovery.

    q1 = n lam^2 gamma / log(p-k)                        (should diverge)
    q2 = (lam/beta_min)(1 + (sqrt(k)/gamma) sqrt(loglog/log))  (should vanish)
    q3 = gamma^3 min{k, log(p-k)/loglog(p-k)}            (should diverge)
    """
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma!r}")
    if not lam > 0 or not beta_min > 0:
        raise ParameterError("lam and beta_min must be positive")
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    log_gap = _log_gap(p, k)
    loglog_gap = _loglog_gap(p, k)
    q1 = n * lam * lam * gamma / log_gap
    q2 = lam / beta_min * (1.0 + math.sqrt(k) / gamma * math.sqrt(loglog_gap / log_gap))
    q3 = gamma**3 * min(k, log_gap / loglog_gap)
    return ConditionReport(q1=q1, q2=q2, q3=q3)


def snr_diagnostic(gamma: float, n: int, beta_min: float) -> float:
    """gamma * n * beta_min^2; when this stays bounded no method can recover."""
    if not gamma > 0 or not n > 0 or not beta_min > 0:
        raise ParameterError("gamma, n, beta_min must all be positive")
    return gamma * n * beta_min * beta_min


def hoeffding_bound(n: int, delta: float) -> float:
    """2 exp(-2 n delta^2): two-sided deviation of a mean of n bounded variates."""
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    if delta < 0:
        raise ParameterError(f"delta must be non-negative, got {delta!r}")
    return 2.0 * math.exp(-2.0 * n * delta * delta)


def chi2_bound(m: int, delta: float) -> float:
    """exp(-3 m delta^2 / 16): upper tail P[X >= m(1 + delta)] for chi-squared with m dof.

    Valid only on 0 <= delta < 1/2.
    """
    if m < 1:
        raise ParameterError(f"m must be at least 1, got {m}")
    if not 0.0 <= delta < 0.5:
        raise ParameterError(f"delta must lie in [0, 1/2), got {delta!r}")
    return math.exp(-3.0 * m * delta * delta / 16.0)


def gaussian_bound(sigma2: float, delta: float) -> float:
    """2 exp(-delta^2 / (2 sigma^2)): two-sided tail of N(0, sigma^2)."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2!r}")
    if delta < 0:
        raise ParameterError(f"delta must be non-negative, got {delta!r}")
    return 2.0 * math.exp(-delta * delta / (2.0 * sigma2))


def tail_bound(kind: str, **params) -> float:
    """Dispatch to one of the closed-form tail bounds; unclamped (may exceed 1)."""
    if kind == "hoeffding":
        return hoeffding_bound(**params)
    if kind == "chi2":
        return chi2_bound(**params)
    if kind == "gaussian":
        return gaussian_bound(**params)
    raise ParameterError(f"kind must be one of ('hoeffding', 'chi2', 'gaussian'), got {kind!r}")


def sv_deviation(gamma: float, k: int, p: int, theta_frac: float, t: float) -> float:
    """Deviation scale for singular values of a sparsified n x k block.

    T = (1/gamma) sqrt(max{ log t / (theta_frac k log(p-k)),
                            log(theta_frac log(p-k)) / (theta_frac log(p-k)) }).

    theta_frac here is a fraction in (0, 1], not the control parameter.
    """
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma!r}")
    if not 0.0 < theta_frac <= 1.0:
        raise ParameterError(f"theta_frac must lie in (0, 1], got {theta_frac!r}")
    if t < 2:
        raise ParameterError(f"t must be at least 2, got {t!r}")
    log_gap = _log_gap(p, k)
    scaled = theta_frac * log_gap
    if scaled <= 1.0:
        raise ParameterError(f"need theta_frac * log(p - k) > 1, got {scaled!r}")
    first = math.log(t) / (theta_frac * k * log_gap)
    second = math.log(scaled) / scaled
    return math.sqrt(max(first, second)) / gamma


def singular_extremes(m: SparseMeasurementMatrix, cols: Sequence[int]) -> tuple[float, float]:
    """(s_min, s_max) / sqrt(n) of the dense submatrix on the given columns."""
    cols = np.asarray(cols, dtype=np.int64)
    n = m.spec.n
    if cols.size > n:
        raise ParameterError(f"column subset size {cols.size} exceeds n = {n}")
    if cols.size == 0:
        raise ParameterError("column subset must be non-empty")
    s = np.linalg.svd(m.dense_columns(cols), compute_uv=False)
    root_n = math.sqrt(n)
    return float(s[-1] / root_n), float(s[0] / root_n)


BoundCheck = namedtuple("BoundCheck", ["kind", "params", "bound", "estimate", "limit", "ok"])

# Parameter grid chosen so every bound is informative (< 1) while the true
# probability sits well below it.
DOMINATION_GRID = (
    ("hoeffding", {"n": 1000, "prob": 0.5, "delta": 0.05}),
    ("hoeffding", {"n": 500, "prob": 0.3, "delta": 0.06}),
    ("hoeffding", {"n": 2000, "prob": 0.7, "delta": 0.03}),
    ("chi2", {"m": 100, "delta": 0.2}),
    ("chi2", {"m": 200, "delta": 0.3}),
    ("chi2", {"m": 400, "delta": 0.25}),
    ("gaussian", {"sigma2": 1.0, "delta": 2.0}),
    ("gaussian", {"sigma2": 4.0, "delta": 5.0}),
    ("gaussian", {"sigma2": 0.25, "delta": 1.5}),
)


def run_bound_checks(seed: int, samples: int = 100_000, grid=DOMINATION_GRID) -> list[BoundCheck]:
    """Monte Carlo estimate of each tail probability against its bound.

    A check passes when the empirical exceedance is at most
    bound + 3 sqrt(bound (1 - bound) / samples).
    """
    if samples < 1:
        raise ParameterError(f"samples must be at least 1, got {samples}")
    gen = np.random.default_rng(seed)
    out = []
    for kind, params in grid:
        if kind == "hoeffding":
            n, prob, delta = params["n"], params["prob"], params["delta"]
            bound = hoeffding_bound(n, delta)
            means = gen.binomial(n, prob, size=samples) / n
            exceed = np.abs(means - prob) >= delta
        elif kind == "chi2":
            m_dof, delta = params["m"], params["delta"]
            bound = chi2_bound(m_dof, delta)
            exceed = gen.chisquare(m_dof, size=samples) >= m_dof * (1.0 + delta)
        elif kind == "gaussian":
            sigma2, delta = params["sigma2"], params["delta"]
            bound = gaussian_bound(sigma2, delta)
            exceed = np.abs(gen.normal(0.0, math.sqrt(sigma2), size=samples)) >= delta
        else:
            raise ParameterError(f"unknown bound kind {kind!r}")
        estimate = float(exceed.mean())
        limit = bound + 3.0 * math.sqrt(bound * (1.0 - bound) / samples)
        out.append(BoundCheck(kind=kind, params=dict(params), bound=bound, estimate=estimate, limit=limit, ok=estimate <= limit))
    return out
