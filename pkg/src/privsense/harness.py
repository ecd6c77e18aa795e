"""Distinguishing-advantage experiments and bound audits.

The distinguisher's prior over the two systems is uniform throughout, so
the advantage of a guessing rule with success probability ``p`` is
``2p - 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Mapping, NamedTuple

import numpy as np
from scipy import stats

from . import acproto as ap
from . import metrology as mt
from . import qcore as qc
from .config import DEFAULT_TOLERANCES as TOL
from .errors import InvariantError, WiringError

CONFIDENCE = 0.99


class AdvantageEstimate(NamedTuple):
    d_hat: float
    ci_low: float
    ci_high: float
    trials: int
    mode: str  # "exact" or "empirical"

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


def _exact(value: float) -> AdvantageEstimate:
    return AdvantageEstimate(value, value, value, 0, "exact")


def ensemble_distance(ens_a: Mapping, ens_b: Mapping, quantum: bool = True) -> float:
    """Trace distance between two classical-quantum ensembles.

    Each observation label is an orthogonal classical flag, so the distance
    is the sum over labels of ``1/2 || p_A rho_A - p_B rho_B ||_1``.  With
    ``quantum=False`` the registers are ignored and only the label
    distributions are compared.
    """
    total = 0.0
    for label in set(ens_a) | set(ens_b):
        a, b = ens_a.get(label), ens_b.get(label)
        pa = a.probability if a else 0.0
        pb = b.probability if b else 0.0
        states = [x.state for x in (a, b) if x is not None]
        if not quantum or all(s is None for s in states):
            total += 0.5 * abs(pa - pb)
            continue
        if any(s is None for s in states):
            raise InvariantError("one system returns quantum registers for this observation and the other none")
        ma = pa * a.state.matrix if a else 0.0
        mb = pb * b.state.matrix if b else 0.0
        if a and b and a.state.dims != b.state.dims:
            raise InvariantError(f"register shapes differ: {a.state.dims} vs {b.state.dims}")
        total += 0.5 * qc.trace_norm(ma - mb)
    return min(total, 1.0)


def exact_advantage(sys_a, sys_b, inputs, quantum: bool = True,
                    max_branches: int = TOL.max_branches) -> AdvantageEstimate:
    """Optimal advantage for fixed classical inputs, by full branch enumeration (one round)."""
    for s in (sys_a, sys_b):
        if s.rounds != 1:
            raise InvariantError("exact advantage is defined for single-round systems")
    ens_a = ap.cq_output(sys_a, inputs, max_branches)
    ens_b = ens_a if sys_b is sys_a else ap.cq_output(sys_b, inputs, max_branches)
    return _exact(ensemble_distance(ens_a, ens_b, quantum))


# ---------------------------------------------------------------------------
# empirical estimation


@dataclass(frozen=True)
class Distinguisher:
    """Input policy plus decision rule.

    ``make_inputs(rng)`` returns the inputs for one trial (a mapping or an
    :class:`~privsense.acproto.Strategy`); it receives a generator derived
    from the trial seed, so adaptive policies stay reproducible.
    ``decide(transcript)`` returns 0 to guess the first system and 1 for
    the second.
    """

    make_inputs: Callable[[np.random.Generator], Any]
    decide: Callable[[ap.Transcript], int]


def hoeffding_interval(successes: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    h = math.sqrt(math.log(2 / (1 - confidence)) / (2 * trials))
    p = successes / trials
    return max(p - h, 0.0), min(p + h, 1.0)


def clopper_pearson_interval(successes: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    alpha = 1 - confidence
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


def advantage_from_counts(successes: int, trials: int, exact_ci: bool = False,
                          confidence: float = CONFIDENCE) -> AdvantageEstimate:
    """``2p - 1`` floored at 0, with the interval for ``p`` mapped the same way."""
    p = successes / trials
    lo, hi = (clopper_pearson_interval if exact_ci else hoeffding_interval)(successes, trials, confidence)
    return AdvantageEstimate(max(2 * p - 1, 0.0), max(2 * lo - 1, 0.0), max(2 * hi - 1, 0.0), trials, "empirical")


def trial_seeds(seed: int, trials: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(trials)


def estimate_advantage(sys_a, sys_b, strategy: Distinguisher, trials: int, seed: int,
                       exact_ci: bool = False) -> AdvantageEstimate:
    """Monte-Carlo advantage: half the trials on each system, per-trial derived seeds.

    A trial whose run aborts (out-of-domain payload) counts as a wrong guess.
    """
    if trials < 100:
        raise InvariantError("at least 100 trials are required")
    systems = (sys_a, sys_b)
    correct = 0
    for i, ss in enumerate(trial_seeds(seed, trials)):
        label = i % 2
        run_seed, strat_seed = ss.generate_state(2)
        inputs = strategy.make_inputs(np.random.default_rng(strat_seed))
        t = systems[label].execute(inputs, seed=int(run_seed))
        if t.aborted:
            continue
        correct += int(strategy.decide(t) == label)
    return advantage_from_counts(correct, trials, exact_ci)


class BernoulliSystem:
    """Calibration system: one open interface that emits a single bit with ``Pr(1) = p``."""

    rounds = 1

    def __init__(self, p_one: float):
        if not 0 <= p_one <= 1:
            raise InvariantError("probability outside [0, 1]")
        self.p_one = p_one

    def execute(self, inputs=None, seed: int = 0, **_) -> ap.Transcript:
        bit = int(ap.stream_for(seed, "bernoulli").random() < self.p_one)
        msg = ap.Message(1, "ext:1", "out", ap.BIT, bit)
        outputs = {1: ((ap.BIT, bit),)}
        return ap.Transcript(1, (msg,), outputs, None, None, ap._observation(outputs))

    def distribution(self) -> dict:
        return {0: 1 - self.p_one, 1: self.p_one}


def bernoulli_advantage(a: BernoulliSystem, b: BernoulliSystem) -> float:
    return abs(a.p_one - b.p_one)


def read_bit(t: ap.Transcript, party: int = 1) -> int:
    return int(t.outputs[party][-1][1])


# ---------------------------------------------------------------------------
# audits


def _flag(value: float, bound: float | None) -> str:
    if bound is None:
        return "n/a"
    return "<=" if value <= bound + 1e-9 else ">"


@dataclass(frozen=True)
class BoundAudit:
    """Measured distances next to every bound that claims to cap them."""

    measured: float
    exact_advantage: float | None
    multi_round_bound: float
    privacy_bound: float
    alignment_bound_stated: float
    alignment_bound_chain: float | None
    P: float
    k_star: float
    eps_star: float
    trace_q: float
    rounds: int
    search_exhausted: bool
    argmax: tuple
    relations: dict = field(default_factory=dict)
    notes: tuple = ()

    def recompute_relations(self) -> dict:
        rel = {
            "measured_vs_privacy_bound": _flag(self.measured, self.privacy_bound),
            "measured_vs_alignment_stated": _flag(self.measured, self.alignment_bound_stated),
            "measured_vs_alignment_chain": _flag(self.measured, self.alignment_bound_chain),
        }
        if self.exact_advantage is not None:
            rel["exact_vs_multi_round_bound"] = _flag(self.exact_advantage, self.multi_round_bound)
        return rel

    def record(self) -> dict:
        d = asdict(self)
        d["argmax"] = [list(map(float, x)) for x in self.argmax]
        d["notes"] = list(self.notes)
        return d


def default_partition(n: int) -> ap.PartyPartition:
    return ap.PartyPartition.last_dishonest(n)


def advantage_at(rho: qc.DensityMatrix, enc: mt.EncodingFamily, partition: ap.PartyPartition,
                 theta) -> float:
    """Exact advantage between the real and simulated systems, maximised over the dishonest bits."""
    real = ap.build_system(ap.SystemSpec.real(partition, general=True), enc, rho)
    sim = ap.build_system(ap.SystemSpec.simulated(partition, general=True), enc, rho)
    theta = np.mod(np.asarray(theta, dtype=float), 2 * math.pi)
    best = 0.0
    dishonest = sorted(partition.dishonest)
    for bits in itertools.product((0, 1), repeat=len(dishonest)):
        inputs = {mu: float(theta[mu - 1]) for mu in sorted(partition.honest)}
        inputs |= dict(zip(dishonest, bits))
        best = max(best, exact_advantage(real, sim, inputs).d_hat)
    return best


def audit(rho: qc.DensityMatrix, enc: mt.EncodingFamily, partition: ap.PartyPartition | None = None,
          budget: mt.SearchBudget = mt.SearchBudget(), rounds: int = 1, seed: int = 0) -> BoundAudit:
    """Compare the equivalence-class distance and exact advantage with every stated bound.

    Violations are reported through ``relations``; nothing here asserts.
    """
    partition = partition or default_partition(enc.n)
    partition.require_adversary()
    report = mt.privacy_report(rho, enc, allow_finite_difference=not enc.is_unitary)
    dist = mt.equivalent_class_distance(rho, enc, budget=budget, seed=seed)
    notes = []
    try:
        adv = max(advantage_at(rho, enc, partition, th) for th in dist.argmax)
    except WiringError as exc:
        adv = None
        notes.append(f"exact advantage skipped: {exc}")
    if dist.exhausted:
        notes.append("search budget exhausted; measured distance is a partial lower bound")
    result = BoundAudit(
        measured=dist.value,
        exact_advantage=adv,
        multi_round_bound=mt.multi_round_bound(dist.value, rounds),
        privacy_bound=report.eps_bugalho,
        alignment_bound_stated=report.alignment_bound,
        alignment_bound_chain=report.alignment_bound_chain,
        P=report.P,
        k_star=report.k_star,
        eps_star=report.eps_star,
        trace_q=report.trace_q,
        rounds=rounds,
        search_exhausted=dist.exhausted,
        argmax=tuple(np.asarray(x, dtype=float) for x in dist.argmax),
        notes=tuple(notes),
    )
    return _with_relations(result)


def _with_relations(a: BoundAudit) -> BoundAudit:
    object.__setattr__(a, "relations", a.recompute_relations())
    return a
