"""Closed-form first-order Wilson loop predictions, error bounds and
Poisson diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrumError, NormalizationError, WrongRegimeError
from .groups import (
    UnitaryRep,
    a_beta,
    a_beta_eigenvalues,
    c_beta_abelian,
    c_beta_main,
    log_r_beta,
    r_beta,
    spectrum,
)

TWO_E_PLUS_2 = 2 * math.e + 2
MAIN_THRESHOLD = (1000.0, 14.0)
ABELIAN_THRESHOLD = (60.0, 14.0)
ABELIAN_MIN_L = 50
TV_CONSTANT_ABELIAN = 1290.0
TV_CONSTANT_GENERAL = 300.0
LOG_FLOOR = 1e-300
PMF_TOL = 1e-9


@dataclass(frozen=True)
class Prediction:
    value: float
    regime: str
    beta: float
    ell: float
    rep_id: str
    eigenvalues: tuple = ()
    r_beta: float = 0.0
    log_r_beta: float = -math.inf
    trace_form: float = math.nan

    def to_json(self):
        out = {"value": self.value, "regime": self.regime, "beta": self.beta, "ell": self.ell, "rep": self.rep_id,
               "eigenvalues": list(self.eigenvalues), "trace_form": self.trace_form}
        out.update(log_or_value("r_beta", self.r_beta, self.log_r_beta))
        return out


def log_or_value(name, value, log_value):
    """``{name: value}``, or ``{"log_" + name: log}`` when the value is below 1e-300."""
    if value < LOG_FLOOR:
        return {f"log_{name}": log_value}
    return {name: value}


def predict_general(rep: UnitaryRep, beta: float, ell: float) -> Prediction:
    """``sum_i exp(-ell r (1 - lambda_i))`` over the eigenvalues of ``A_beta``,
    cross-checked against ``exp(-ell r) Tr exp(ell r A_beta)``."""
    if beta < 0 or ell < 0:
        raise ValueError("beta and ell must be nonnegative")
    r = r_beta(rep, beta)
    lam = a_beta_eigenvalues(rep, beta)
    value = float(np.sum(np.exp(-ell * r * (1.0 - lam))))
    # trace form: exp(ell r A) by eigendecomposition of the Hermitian matrix
    w, v = np.linalg.eigh(a_beta(rep, beta))
    expm = (v * np.exp(ell * r * w)) @ v.conj().T
    trace_form = float(math.exp(-ell * r) * np.trace(expm).real)
    if abs(trace_form - value) > 1e-10 * max(abs(value), 1e-300):
        raise AssertionError(f"trace identity failed: {value} vs {trace_form}")
    return Prediction(value, "general", float(beta), float(ell), rep.name, tuple(float(x) for x in lam), r,
                      log_r_beta(rep, beta), trace_form)


def predict_abelian(rep: UnitaryRep, beta: float, ell: float) -> Prediction:
    """``exp(-ell r (1 - A_beta))`` for a one-dimensional representation."""
    if rep.dim != 1:
        raise WrongRegimeError("the Abelian formula needs a one-dimensional representation")
    if beta < 0 or ell < 0:
        raise ValueError("beta and ell must be nonnegative")
    r = r_beta(rep, beta)
    a = float(a_beta(rep, beta)[0, 0].real)
    value = math.exp(-ell * r * (1.0 - a))
    return Prediction(value, "abelian-1d", float(beta), float(ell), rep.name, (a,), r, log_r_beta(rep, beta), value)


# ---------------------------------------------------------------- error bounds

@dataclass(frozen=True)
class ErrorBudget:
    bound: float
    log_bound: float
    threshold_ok: bool
    threshold: float
    c_beta: float | None
    degenerate: bool
    notes: tuple = field(default_factory=tuple)

    def to_json(self):
        out = {"threshold_ok": self.threshold_ok, "threshold": self.threshold, "c_beta": self.c_beta,
               "degenerate": self.degenerate, "notes": list(self.notes)}
        out.update(log_or_value("bound", self.bound, self.log_bound))
        return out


def beta_thresholds(rep: UnitaryRep) -> dict:
    """Minimal beta of the general and the Abelian error bounds (``inf`` if not faithful)."""
    gap = spectrum(rep).delta_g
    n = rep.group.order
    if gap <= 0:
        return {"main": math.inf, "abelian": math.inf}
    main = (MAIN_THRESHOLD[0] + MAIN_THRESHOLD[1] * math.log(n)) / gap
    abel = (ABELIAN_THRESHOLD[0] + ABELIAN_THRESHOLD[1] * math.log(n - 1)) / gap if n > 1 else math.inf
    return {"main": main, "abelian": abel}


def _degenerate_budget(threshold, note):
    return ErrorBudget(math.inf, math.inf, False, threshold, None, True, (note,))


def error_bound_general(rep: UnitaryRep, beta: float, d: int | None = None) -> ErrorBudget:
    """``(2e + 2) d exp(-beta Delta c / (3 + 2c))``; flag requires the beta threshold
    and ``||A_beta||_op < 1``."""
    d = rep.dim if d is None else d
    thr = beta_thresholds(rep)["main"]
    try:
        c = c_beta_main(rep, beta)
    except DegenerateSpectrumError as exc:
        return _degenerate_budget(thr, str(exc))
    gap = spectrum(rep).delta_g
    log_b = math.log(TWO_E_PLUS_2 * d) - beta * gap * c / (3 + 2 * c)
    return ErrorBudget(math.exp(log_b), log_b, bool(beta >= thr), thr, c, False)


def error_bound_abelian(rep: UnitaryRep, beta: float, N: float, L: float) -> ErrorBudget:
    """``(2e + 2)(exp(-beta Delta / 2) + N^4 exp(-beta L Delta / 2))^(c / (1.5 + c))``."""
    if rep.dim != 1:
        raise WrongRegimeError("the Abelian bound needs a one-dimensional representation")
    thr = beta_thresholds(rep)["abelian"]
    try:
        c = c_beta_abelian(rep, beta)
    except DegenerateSpectrumError as exc:
        return _degenerate_budget(thr, str(exc))
    gap = spectrum(rep).delta_g
    t1 = -beta * gap / 2
    t2 = 4 * math.log(N) - beta * L * gap / 2 if N > 0 else -math.inf
    log_inner = max(t1, t2) + math.log1p(math.exp(min(t1, t2) - max(t1, t2)))
    log_b = math.log(TWO_E_PLUS_2) + log_inner * c / (1.5 + c)
    notes = () if L >= ABELIAN_MIN_L else (f"loop distance L={L} below {ABELIAN_MIN_L}",)
    ok = bool(beta >= thr and L >= ABELIAN_MIN_L)
    return ErrorBudget(math.exp(log_b), log_b, ok, thr, c, False, notes)


# ---------------------------------------------------------------- Poisson diagnostics

def poisson_pmf(lam: float, k: int) -> float:
    if lam < 0:
        raise ValueError("Poisson mean must be nonnegative")
    if k < 0:
        return 0.0
    if lam == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))


def poisson_pmf_vector(lam: float, n: int) -> np.ndarray:
    """Poisson probabilities of ``0, ..., n - 1``."""
    return np.array([poisson_pmf(lam, k) for k in range(n)])


def _check_pmf(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < -PMF_TOL) or abs(p.sum() - 1.0) > PMF_TOL:
        raise NormalizationError(f"{name} is not a probability vector (sum {p.sum():.12g})")
    return p


def tv_distance(p, q) -> float:
    """Half the l1 distance between two pmfs on ``0, 1, ...``."""
    p = _check_pmf(p, "p")
    q = _check_pmf(q, "q")
    n = max(p.size, q.size)
    a = np.zeros(n)
    b = np.zeros(n)
    a[: p.size] = p
    b[: q.size] = q
    return 0.5 * float(np.abs(a - b).sum())


def tv_to_poisson(p, lam: float) -> float:
    """TV distance from ``p`` (support ``0..len(p)-1``) to Poisson(lam),
    counting the Poisson mass beyond the support exactly."""
    p = _check_pmf(p, "p")
    q = poisson_pmf_vector(lam, p.size)
    tail = max(0.0, 1.0 - math.fsum(q.tolist()))
    return 0.5 * (float(np.abs(p - q).sum()) + tail)


def poisson_tv_bound_abelian(beta: float, ell: float, rep: UnitaryRep) -> float:
    r = r_beta(rep, beta)
    return TV_CONSTANT_ABELIAN * math.exp(1.5 * ell * r) * r


def poisson_tv_bound_general(beta: float, ell: float, rep: UnitaryRep) -> float:
    r = r_beta(rep, beta)
    return TV_CONSTANT_GENERAL * math.exp(1.5 * ell * r) * r


def left_tail_bound(ell: float, r: float) -> float:
    """Bound on ``P(N_gamma <= ell r / 2)``."""
    return 2 * math.e * math.exp(-0.15 * ell * r)


def tv_bound_plugin(ell_r: float, r: float, constant=TV_CONSTANT_ABELIAN) -> float:
    """The TV bound as a function of ``ell r`` and ``r`` directly."""
    return constant * math.exp(1.5 * ell_r) * r


__all__ = [
    "ErrorBudget", "Prediction", "beta_thresholds", "error_bound_abelian", "error_bound_general",
    "left_tail_bound", "log_or_value", "poisson_pmf", "poisson_pmf_vector", "poisson_tv_bound_abelian",
    "poisson_tv_bound_general", "predict_abelian", "predict_general", "tv_bound_plugin", "tv_distance",
    "tv_to_poisson",
]
