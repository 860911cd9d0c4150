"""Differentially private counting with tuple-sensitivity truncation.

The released answer is the count over a truncated database, in which every
tuple of the primary private relation whose sensitivity exceeds a
threshold tau is dropped; the truncated count has global sensitivity tau,
so Laplace noise of scale tau / epsilon suffices.  tau itself is learned
privately with the sparse vector technique.

Because no relation appears twice in a query, the join size is linear in
the counts of the primary relation, and a primary tuple's sensitivity does
not depend on that relation at all.  Hence

    Q(T(D, i)) = sum of cnt(t) * tsens(t) over primary tuples with tsens(t) <= i

which lets the threshold scan evaluate every i from one sorted array.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, UnknownRelation
from .query import ConjunctiveQuery
from .relation import Database, Key
from .sensitivity import Analysis, MultiplicityTable, analyze


@dataclass(frozen=True)
class DpConfig:
    epsilon: float
    epsilon_tsens: float
    ell: int
    primary_private: str
    seed: int = 0
    test_mode: bool = False
    # share of epsilon_tsens spent on the noisy reference count Q-hat; the rest goes to SVT
    eps1_fraction: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DataError("epsilon must be positive")
        if not 0 < self.epsilon_tsens < self.epsilon:
            raise DataError("epsilon_tsens must lie strictly between 0 and epsilon")
        if isinstance(self.ell, bool) or not isinstance(self.ell, int) or self.ell < 1:
            raise DataError("ell must be a positive integer")
        if not 0 < self.eps1_fraction < 1:
            raise DataError("eps1_fraction must lie strictly between 0 and 1")

    @property
    def epsilon1(self) -> float:
        return self.epsilon_tsens * self.eps1_fraction

    @property
    def epsilon2(self) -> float:
        return self.epsilon_tsens - self.epsilon1

    @property
    def epsilon_answer(self) -> float:
        return self.epsilon - self.epsilon_tsens

    def budget(self) -> dict[str, float]:
        return {
            "epsilon": self.epsilon,
            "epsilon_tsens": self.epsilon_tsens,
            "epsilon1": self.epsilon1,
            "epsilon2": self.epsilon2,
            "epsilon_answer": self.epsilon_answer,
        }


@dataclass(frozen=True)
class DpAnswer:
    value: float | int  # exact int in test mode
    tau: int
    raw_truncated: int  # not private; for debugging only
    budget: dict[str, float] = field(default_factory=dict)
    noise_scale: float = 0.0
    clamped: bool = False


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; every draw is a function of the seed."""
    if seed < 0:
        raise DataError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(seed))


def laplace_samples(scale: float, size: int, rng: np.random.Generator | None, test_mode: bool = False) -> np.ndarray:
    """``size`` draws from Laplace(0, scale) by inverting the CDF."""
    if not scale > 0:
        raise DataError(f"Laplace scale must be positive, got {scale}")
    if test_mode:
        return np.zeros(size)
    p = rng.random(size)
    while True:  # p = 0 would map to -inf
        zero = p == 0.0
        if not zero.any():
            break
        p[zero] = rng.random(int(zero.sum()))
    with np.errstate(divide="ignore"):
        return np.where(p < 0.5, scale * np.log(2 * p), -scale * np.log(2 * (1 - p)))


def laplace_sample(scale: float, rng: np.random.Generator | None, test_mode: bool = False) -> float:
    return float(laplace_samples(scale, 1, rng, test_mode)[0])


# -- truncation ---------------------------------------------------------------------


def _table(tables: Sequence[MultiplicityTable], relation: str) -> MultiplicityTable:
    for tb in tables:
        if tb.relation == relation:
            return tb
    raise UnknownRelation(f"primary private relation {relation!r} is not in the query")


def row_sensitivities(db: Database, tables: Sequence[MultiplicityTable], relation: str) -> dict[Key, int]:
    """Sensitivity of one copy of each stored row of ``relation``."""
    tb = _table(tables, relation)
    atom = tb.atom
    rel = db[relation]
    if rel.arity != len(atom.attrs):
        raise DataError(f"{relation} has arity {rel.arity}, atom has {len(atom.attrs)}")
    pos = [atom.attrs.index(a) for a in tb.schema]
    out = {}
    for key in rel.rows:
        if not tb.satisfiable or not atom.accepts(db.decode(key)):
            out[key] = 0
        else:
            out[key] = tb.rows.get(tuple(key[p] for p in pos), 0)
    return out


def truncate(
    db: Database, q: ConjunctiveQuery, tables: Sequence[MultiplicityTable], primary_private: str, tau: int
) -> Database:
    """Drop every copy of each primary tuple whose sensitivity exceeds ``tau``."""
    if primary_private not in q.relations:
        raise UnknownRelation(f"primary private relation {primary_private!r} is not in the query")
    sens = row_sensitivities(db, tables, primary_private)
    return db.with_relation(db[primary_private].filter(lambda k: sens[k] <= tau))


@dataclass(frozen=True)
class TruncationProfile:
    """Q(T(D, i)) for every i, from the sorted per-row sensitivities."""

    levels: tuple[int, ...]  # distinct sensitivities, ascending
    prefix: tuple[int, ...]  # prefix[j] = count contributed by rows at levels[: j + 1]

    @classmethod
    def build(cls, db: Database, tables: Sequence[MultiplicityTable], relation: str) -> TruncationProfile:
        sens = row_sensitivities(db, tables, relation)
        mass: dict[int, int] = {}
        for key, s in sens.items():
            mass[s] = mass.get(s, 0) + s * db[relation].rows[key]
        levels = tuple(sorted(mass))
        prefix, acc = [], 0
        for s in levels:
            acc += mass[s]
            prefix.append(acc)
        return cls(levels, tuple(prefix))

    def count(self, tau: int) -> int:
        j = bisect.bisect_right(self.levels, tau)
        return self.prefix[j - 1] if j else 0

    def counts(self, taus: np.ndarray) -> np.ndarray:
        """Vectorized ``count`` as float64 (for noisy comparisons only)."""
        j = np.searchsorted(np.asarray(self.levels, dtype=float), taus, side="right")
        table = np.concatenate(([0.0], np.asarray(self.prefix, dtype=float)))
        return table[j]

    @property
    def full(self) -> int:
        return self.prefix[-1] if self.prefix else 0


def truncated_count(db: Database, tables: Sequence[MultiplicityTable], relation: str, tau: int) -> int:
    return TruncationProfile.build(db, tables, relation).count(tau)


# -- threshold learning ---------------------------------------------------------------

_CHUNK = 4096


def learn_threshold(profile: TruncationProfile, cfg: DpConfig, rng: np.random.Generator | None) -> int:
    """Sparse-vector scan for the first i whose truncated count reaches the noisy reference.

    The reference is Q-hat = Q(T(D, ell)) + Lap(ell / eps1).  Query i is
    (Q(T(D, i)) - Q-hat) / i, sensitivity 1, compared against a noisy zero
    threshold.  Returns ell when no query fires.
    """
    ell = cfg.ell
    q_hat = profile.count(ell) + laplace_sample(ell / cfg.epsilon1, rng, cfg.test_mode)
    rho = laplace_sample(2 / cfg.epsilon2, rng, cfg.test_mode)
    start = 1
    while start < ell:
        stop = min(ell, start + _CHUNK)
        i = np.arange(start, stop, dtype=float)
        noise = laplace_samples(4 / cfg.epsilon2, len(i), rng, cfg.test_mode)
        if cfg.test_mode:
            # exact integer arithmetic: q_i >= 0 iff Q(T(D, i)) >= Q-hat
            target = profile.count(ell)
            for tau in range(start, stop):
                if profile.count(tau) >= target:
                    return tau
        else:
            qi = (profile.counts(i) - q_hat) / i + noise
            hit = np.nonzero(qi > rho)[0]
            if hit.size:
                return start + int(hit[0])
        start = stop
    return ell


def tsens_dp(
    db: Database,
    q: ConjunctiveQuery,
    cfg: DpConfig,
    rng: np.random.Generator | None = None,
    analysis: Analysis | None = None,
    ghd=None,
) -> DpAnswer:
    """Private count: learn tau with epsilon_tsens, then answer the tau-truncated query."""
    if cfg.primary_private not in q.relations:
        raise UnknownRelation(f"primary private relation {cfg.primary_private!r} is not in the query")
    if rng is None:
        rng = make_rng(cfg.seed)
    if analysis is None:
        analysis = analyze(db, q, ghd)
    profile = TruncationProfile.build(analysis.bound, analysis.tables, cfg.primary_private)
    tau = learn_threshold(profile, cfg, rng)
    raw = profile.count(tau)
    scale = tau / cfg.epsilon_answer
    if cfg.test_mode:
        value: float | int = raw
        clamped = False
    else:
        noisy = raw + laplace_sample(scale, rng)
        clamped = noisy < 0
        value = max(0.0, noisy)
    return DpAnswer(value, tau, raw, cfg.budget(), scale, clamped)
