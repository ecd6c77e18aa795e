"""Quantum Fisher information, quasi-privacy measures and their security bounds.

Parties are labelled ``1..n`` positionally: slot ``i`` of an encoding acts on
the ``i``-th register of the state it is applied to.  Unitary encodings use
``Lambda_mu(theta) = exp(-i theta H'_mu) . exp(+i theta H'_mu)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import qcore as qc
from .config import DEFAULT_TOLERANCES as TOL
from .errors import (
    DimensionError,
    InvariantError,
    NoInformationError,
    SingularPointError,
)

PROJECTOR_ONE = np.diag([0.0, 1.0]).astype(complex)
BASES = {"z": np.eye(2, dtype=complex), "x": qc.HADAMARD}


def parity(bits: Sequence[int]) -> int:
    return sum(bits) % 2


def _depends_on_every_bit(g, n: int) -> bool:
    for mu in range(n):
        for bits in itertools.product((0, 1), repeat=n):
            flipped = list(bits)
            flipped[mu] ^= 1
            if g(bits) != g(tuple(flipped)):
                break
        else:
            return False
    return True


@dataclass(frozen=True, eq=False)
class EncodingFamily:
    """Per-party local encodings plus the target direction ``a`` and combiner ``g``.

    Exactly one of ``generators`` (2x2 Hermitian rates) or ``channels``
    (callable ``(slot, theta) -> Channel``, slot counted from 1) is given.
    ``basis`` is the local measurement basis used by the honest protocol.
    In ``mean_mode`` ``a`` is ``(1/n, ..., 1/n)`` and is renormalised
    wherever a unit vector is required.
    """

    n: int
    a: np.ndarray
    generators: tuple | None = None
    channels: Callable | None = None
    g: Callable = parity
    basis: str = "z"
    mean_mode: bool = False
    check_g: bool = field(default=True, repr=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        if a.shape != (self.n,):
            raise DimensionError(f"a has length {a.size}, expected n={self.n}")
        if np.any(a == 0):
            raise InvariantError("every entry of a must be non-zero")
        if not self.mean_mode and abs(np.linalg.norm(a) - 1) > TOL.unit_norm:
            raise InvariantError(f"a must be a unit vector (norm {np.linalg.norm(a)})")
        object.__setattr__(self, "a", a)
        if (self.generators is None) == (self.channels is None):
            raise InvariantError("give exactly one of generators or channels")
        if self.generators is not None:
            gens = tuple(qc.as_matrix(h) for h in self.generators)
            if len(gens) != self.n:
                raise DimensionError(f"{len(gens)} generators for n={self.n}")
            for h in gens:
                if h.shape != (2, 2) or not qc.is_hermitian(h):
                    raise InvariantError("generators must be 2x2 Hermitian")
            object.__setattr__(self, "generators", gens)
        else:
            for slot in range(1, self.n + 1):
                ch = self.channels(slot, 0.0)
                # identity check on the Choi matrix
                choi = sum(np.kron(np.eye(2), k) @ _omega() @ np.kron(np.eye(2), k).conj().T
                           for k in ch.kraus_ops)
                if np.max(np.abs(choi - _omega())) > TOL.completeness:
                    raise InvariantError(f"channel for party {slot} is not the identity at theta=0")
        if self.basis not in BASES:
            raise InvariantError(f"unknown measurement basis {self.basis!r}")
        if self.check_g and not _depends_on_every_bit(self.g, self.n):
            raise InvariantError("combiner g must depend on every party's bit")

    @property
    def is_unitary(self) -> bool:
        return self.generators is not None

    @property
    def unit_a(self) -> np.ndarray:
        return self.a / np.linalg.norm(self.a)

    def unitary(self, slot: int, theta: float) -> np.ndarray:
        vals, vecs = np.linalg.eigh(self.generators[slot - 1])
        return (vecs * np.exp(-1j * theta * vals)) @ vecs.conj().T

    def channel(self, slot: int, theta: float) -> qc.Channel:
        if self.is_unitary:
            return qc.unitary_channel(self.unitary(slot, theta))
        return self.channels(slot, theta)

    def function_value(self, theta) -> float:
        return float(np.dot(self.a, theta))


def _omega() -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1
    return np.outer(v, v)


def phase_encoding(n: int, a=None, basis: str = "x") -> EncodingFamily:
    """Every party imprints a relative phase with generator ``|1><1|``."""
    a = np.full(n, 1 / math.sqrt(n)) if a is None else np.asarray(a, dtype=float)
    return EncodingFamily(n=n, a=a, generators=(PROJECTOR_ONE,) * n, basis=basis)


def mean_encoding(n: int) -> EncodingFamily:
    return EncodingFamily(n=n, a=np.full(n, 1 / n), generators=(PROJECTOR_ONE,) * n,
                          basis="x", mean_mode=True)


def _check_arity(rho: qc.DensityMatrix, enc: EncodingFamily) -> None:
    if len(rho.dims) != enc.n or any(d != 2 for d in rho.dims):
        raise DimensionError(f"encoding for {enc.n} qubits applied to registers {rho.dims}")


def encode_state(rho: qc.DensityMatrix, enc: EncodingFamily, theta) -> qc.DensityMatrix:
    """Apply every local encoding channel at parameter point ``theta``."""
    _check_arity(rho, enc)
    theta = np.asarray(theta, dtype=float)
    m = rho.matrix
    for i in range(enc.n):
        if enc.is_unitary:
            m = qc.conjugate(m, enc.unitary(i + 1, theta[i]), [i], rho.dims)
        else:
            ch = enc.channel(i + 1, theta[i])
            m = sum(qc.conjugate(m, k, [i], rho.dims) for k in ch.kraus_ops)
    return rho.with_matrix(m, validate=False)


def _commutator_with(h: np.ndarray, m: np.ndarray, axis: int, dims) -> np.ndarray:
    hm = qc.apply_left(m, h, [axis], dims)
    mh = qc.apply_left(m.conj().T, h.conj().T, [axis], dims).conj().T
    return hm - mh


def state_derivative(rho: qc.DensityMatrix, enc: EncodingFamily, theta, mu: int,
                     allow_finite_difference: bool = False, step: float = 1e-5) -> np.ndarray:
    """``d rho(theta) / d theta_mu``; exact ``-i[H'_mu, rho(theta)]`` for unitary encodings."""
    if not 1 <= mu <= enc.n:
        raise InvariantError(f"party index {mu} outside 1..{enc.n}")
    if enc.is_unitary:
        enc_rho = encode_state(rho, enc, theta)
        return -1j * _commutator_with(enc.generators[mu - 1], enc_rho.matrix, mu - 1, rho.dims)
    if not allow_finite_difference:
        raise InvariantError("channel encoding has no generator; pass allow_finite_difference=True")
    return finite_difference_derivative(rho, enc, theta, mu, step)


def finite_difference_derivative(rho, enc, theta, mu, step=1e-5) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    e = np.zeros(enc.n)
    e[mu - 1] = step
    up = encode_state(rho, enc, theta + e).matrix
    down = encode_state(rho, enc, theta - e).matrix
    d = (up - down) / (2 * step)
    return (d + d.conj().T) / 2


def qfim(rho: qc.DensityMatrix, enc: EncodingFamily, theta,
         allow_finite_difference: bool = False) -> np.ndarray:
    """QFIm ``Q_{mu nu} = Re Tr(rho L_mu L_nu)`` from the SLD of each parameter."""
    enc_rho = encode_state(rho, enc, theta).matrix
    slds = [qc.sld_solve(enc_rho, state_derivative(rho, enc, theta, mu, allow_finite_difference))
            for mu in range(1, enc.n + 1)]
    q = np.empty((enc.n, enc.n))
    for i, li in enumerate(slds):
        for j in range(i, enc.n):
            q[i, j] = q[j, i] = np.trace(enc_rho @ li @ slds[j]).real
    return q


def qfim_pure_covariance(psi: qc.DensityMatrix, enc: EncodingFamily, theta) -> np.ndarray:
    """Pure-state QFIm ``4 Re(<H_mu H_nu> - <H_mu><H_nu>)`` on the encoded state."""
    if not enc.is_unitary:
        raise InvariantError("covariance formula needs a unitary encoding")
    _check_arity(psi, enc)
    vals, vecs = np.linalg.eigh(encode_state(psi, enc, theta).matrix)
    if vals[-1] < 1 - 1e-10 or np.any(np.abs(vals[:-1]) > 1e-10):
        raise InvariantError("covariance formula needs a pure state")
    ket = vecs[:, -1]
    gk = [qc.apply_left(ket[:, None], h, [i], psi.dims)[:, 0] for i, h in enumerate(enc.generators)]
    mean = np.array([np.vdot(ket, v) for v in gk])
    q = np.empty((enc.n, enc.n))
    for i in range(enc.n):
        for j in range(enc.n):
            q[i, j] = 4 * (np.vdot(gk[i], gk[j]) - mean[i].conj() * mean[j]).real
    return (q + q.T) / 2


def check_qfim(q: np.ndarray) -> None:
    if np.max(np.abs(q - q.T), initial=0) > 1e-8:
        raise InvariantError("QFIm is not symmetric")
    if np.linalg.eigvalsh((q + q.T) / 2)[0] < -1e-8:
        raise InvariantError("QFIm is not positive semidefinite")


def classical_fisher(dist: Callable[[float], Sequence[float]], theta: float, h: float = 1e-6) -> float:
    """Classical Fisher information ``sum (dp/dtheta)^2 / p`` by central differences."""
    p = np.asarray(dist(theta), dtype=float)
    up = np.asarray(dist(theta + h), dtype=float)
    down = np.asarray(dist(theta - h), dtype=float)
    if min(p.min(), up.min(), down.min()) <= 0:
        raise SingularPointError(f"an outcome has zero probability within {h} of theta={theta}")
    dp = (up - down) / (2 * h)
    return float(np.sum(dp * dp / p))


def _unit(a, tol: float = TOL.unit_norm) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if abs(np.linalg.norm(a) - 1) > tol:
        raise InvariantError(f"direction must be a unit vector (norm {np.linalg.norm(a)})")
    return a


def privacy_measure(q: np.ndarray, a) -> float:
    """Ratio ``a^T Q a / Tr Q`` of information aligned with the target function."""
    a = _unit(a)
    q = np.asarray(q, dtype=float)
    tr = float(np.trace(q))
    if tr <= 1e-12:
        raise NoInformationError("Tr(Q) = 0: the state carries no parameter information")
    p = float(a @ q @ a) / tr
    if p < -1e-10 or p > 1 + 1e-10:
        raise InvariantError(f"privacy measure {p} outside [0, 1]; Q is not PSD")
    return min(max(p, 0.0), 1.0)


def privacy_deficit(q: np.ndarray, a) -> float:
    """``1 - P`` computed as the share of ``Tr Q`` orthogonal to ``a``.

    Summing over an orthonormal complement avoids the cancellation in
    ``1 - a^T Q a / Tr Q`` when the state is (nearly) fully private.
    """
    a = _unit(a)
    q = np.asarray(q, dtype=float)
    tr = float(np.trace(q))
    if tr <= 1e-12:
        raise NoInformationError("Tr(Q) = 0: the state carries no parameter information")
    comp = complete_basis(a)[:, 1:]
    return min(max(float(np.trace(comp.T @ q @ comp)) / tr, 0.0), 1.0)


def bugalho_epsilon(P: float, deficit: float | None = None) -> float:
    """``sqrt(1 - P^2)``; pass ``deficit = 1 - P`` from :func:`privacy_deficit` for full precision."""
    if not 0 <= P <= 1:
        raise InvariantError(f"privacy measure {P} outside [0, 1]")
    d = 1 - P if deficit is None else deficit
    return math.sqrt(d * (2 - d))


def hassani_epsilon(rho: qc.DensityMatrix, enc: EncodingFamily, theta, mode: str = "pairwise",
                    allow_finite_difference: bool = False) -> np.ndarray:
    """Matrix of ``||d_mu rho - d_nu rho||_1`` or ``||[H'_mu - H'_nu, rho(theta)]||_1``."""
    n = enc.n
    out = np.zeros((n, n))
    if mode == "pairwise":
        ders = [state_derivative(rho, enc, theta, mu, allow_finite_difference) for mu in range(1, n + 1)]
        for i, j in itertools.combinations(range(n), 2):
            out[i, j] = out[j, i] = qc.trace_norm(ders[i] - ders[j])
    elif mode == "commutator":
        if not enc.is_unitary:
            raise InvariantError("commutator form needs generator encodings")
        enc_rho = encode_state(rho, enc, theta).matrix
        comms = [_commutator_with(h, enc_rho, i, rho.dims) for i, h in enumerate(enc.generators)]
        for i, j in itertools.combinations(range(n), 2):
            out[i, j] = out[j, i] = qc.trace_norm(comms[i] - comms[j])
    else:
        raise InvariantError(f"unknown mode {mode!r}")
    return out


class AlignmentFit(NamedTuple):
    k_star: float
    eps_star: float


def alignment_residual(q: np.ndarray, a, k: float) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(q - k * np.outer(a, a))))


def qfim_alignment_fit(q: np.ndarray, a, tol: float = 1e-10) -> AlignmentFit:
    """Best ``k`` in ``max |Q_{mu nu} - k a_mu a_nu|`` (convex in ``k``; ternary search)."""
    a = _unit(a)
    q = np.asarray(q, dtype=float)
    half = 2 * abs(float(np.trace(q))) / float(np.min(a * a))
    lo, hi = -half, half
    while hi - lo > tol:
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if alignment_residual(q, a, m1) <= alignment_residual(q, a, m2):
            hi = m2
        else:
            lo = m1
    k = (lo + hi) / 2
    return AlignmentFit(k, alignment_residual(q, a, k))


class AlignmentBound(NamedTuple):
    stated: float
    chain: float | None


def alignment_bound(n: int, eps_star: float, trace_q: float) -> AlignmentBound:
    """``n eps / Tr Q`` and the fidelity-chain form ``sqrt(1 - (1 - n eps/Tr Q)^2)``.

    The chain form is ``None`` when ``n eps / Tr Q`` exceeds 1.
    """
    if trace_q <= 0:
        raise NoInformationError("Tr(Q) must be positive")
    x = n * eps_star / trace_q
    chain = math.sqrt(max(1 - (1 - x) ** 2, 0.0)) if x <= 1 else None
    return AlignmentBound(x, chain)


def complete_basis(a) -> np.ndarray:
    """Orthogonal matrix whose first column is ``a``.

    Gram-Schmidt over ``(a, e_1, e_2, ...)``; candidates whose residual norm is
    below 1e-8 are skipped, and each added column is signed so its first
    non-negligible component is positive.
    """
    a = _unit(a)
    n = a.size
    cols = [a.copy()]
    for i in range(n):
        if len(cols) == n:
            break
        v = np.zeros(n)
        v[i] = 1.0
        for _ in range(2):
            for c in cols:
                v = v - (c @ v) * c
        norm = np.linalg.norm(v)
        if norm < 1e-8:
            continue
        v = v / norm
        lead = v[np.argmax(np.abs(v) > 1e-12)]
        if lead < 0:
            v = -v
        cols.append(v)
    return np.column_stack(cols)


def reparametrize_qfim(q: np.ndarray, b: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.shape != q.shape:
        raise DimensionError(f"reparametrisation matrix {b.shape} for QFIm {q.shape}")
    return b.T @ q @ b


def multi_round_bound(eps: float, rounds: int) -> float:
    """Trace-distance bound after ``rounds`` copies given a single-copy bound ``eps``."""
    if not 0 <= eps <= 1:
        raise InvariantError(f"eps={eps} outside [0, 1]")
    if rounds < 1:
        raise InvariantError("rounds must be at least 1")
    if rounds == 1:
        return float(eps)
    if eps == 1:
        return 1.0
    if eps * eps < 1e-300:
        return min(1.0, eps * math.sqrt(rounds))
    # expm1/log1p keep tiny eps from rounding to zero
    return min(1.0, math.sqrt(-math.expm1(rounds * math.log1p(-eps * eps))))


@dataclass(frozen=True)
class SearchBudget:
    directions: int = 32
    grid: int = 64
    tol: float = 1e-6
    max_evaluations: int = 200_000
    # extra random base points, only used for non-unitary encodings
    base_points: int = 4
    max_parties: int = 4


class ClassDistance(NamedTuple):
    value: float
    argmax: tuple
    exhausted: bool
    evaluations: int


class _BudgetSpent(Exception):
    pass


def search_directions(a, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random unit directions orthogonal to ``a`` followed by all pairwise ones."""
    a = np.asarray(a, dtype=float)
    n = a.size
    if n < 2:
        return []
    comp = complete_basis(a)[:, 1:]
    dirs = []
    for _ in range(count):
        v = rng.normal(size=n - 1)
        dirs.append(comp @ (v / np.linalg.norm(v)))
    for i, j in itertools.combinations(range(n), 2):
        b = np.zeros(n)
        b[i], b[j] = a[j], -a[i]
        dirs.append(b / np.linalg.norm(b))
    return dirs


_GOLD = (math.sqrt(5) - 1) / 2


def equivalent_class_distance(rho: qc.DensityMatrix, enc: EncodingFamily, a=None,
                              budget: SearchBudget = SearchBudget(), seed: int = 0) -> ClassDistance:
    """Heuristic maximum of ``T(rho(theta), rho(theta'))`` over ``a . (theta' - theta) = 0``.

    Multi-start line search: for every direction, a uniform grid on
    ``t in [0, 2 pi sqrt(n))`` is refined by golden-section search around the
    best grid point.  The result is a lower bound on the true maximum.
    """
    if enc.n > budget.max_parties:
        raise DimensionError(f"n={enc.n} exceeds the search limit of {budget.max_parties} parties")
    a = enc.unit_a if a is None else _unit(a)
    rng = np.random.default_rng(seed)
    dirs = search_directions(a, budget.directions, rng)
    bases = [np.zeros(enc.n)]
    if not enc.is_unitary:
        bases += [rng.uniform(0, 2 * math.pi, enc.n) for _ in range(budget.base_points)]
    span = 2 * math.pi * math.sqrt(enc.n)
    evals = 0
    best = (0.0, (bases[0], bases[0].copy()))

    def dist(base_state, base, b, t):
        nonlocal evals
        if evals >= budget.max_evaluations:
            raise _BudgetSpent
        evals += 1
        other = encode_state(rho, enc, np.mod(base + t * b, 2 * math.pi)).matrix
        return qc.trace_distance(base_state, other)

    try:
        for base in bases:
            base_state = encode_state(rho, enc, base).matrix
            for b in dirs:
                ts = np.arange(budget.grid) * span / budget.grid
                vals = [dist(base_state, base, b, t) for t in ts]
                k = int(np.argmax(vals))
                t_best, v_best = ts[k], vals[k]
                lo = ts[k - 1] if k > 0 else 0.0
                hi = ts[k + 1] if k + 1 < budget.grid else span
                x1 = hi - _GOLD * (hi - lo)
                x2 = lo + _GOLD * (hi - lo)
                f1, f2 = dist(base_state, base, b, x1), dist(base_state, base, b, x2)
                while hi - lo > budget.tol:
                    if f1 >= f2:
                        hi, x2, f2 = x2, x1, f1
                        x1 = hi - _GOLD * (hi - lo)
                        f1 = dist(base_state, base, b, x1)
                    else:
                        lo, x1, f1 = x1, x2, f2
                        x2 = lo + _GOLD * (hi - lo)
                        f2 = dist(base_state, base, b, x2)
                for t, v in ((x1, f1), (x2, f2)):
                    if v > v_best:
                        t_best, v_best = t, v
                if v_best > best[0]:
                    best = (v_best, (np.mod(base, 2 * math.pi), np.mod(base + t_best * b, 2 * math.pi)))
    except _BudgetSpent:
        return ClassDistance(min(best[0], 1.0), best[1], True, evals)
    return ClassDistance(min(best[0], 1.0), best[1], False, evals)


@dataclass(frozen=True)
class PrivacyReport:
    P: float
    eps_bugalho: float
    eps_hassani_pairwise: np.ndarray
    eps_hassani_commutator: np.ndarray | None
    k_star: float
    eps_star: float
    alignment_bound: float
    alignment_bound_chain: float | None
    trace_q: float
    qfim: np.ndarray


def privacy_report(rho: qc.DensityMatrix, enc: EncodingFamily, theta=None,
                   allow_finite_difference: bool = False) -> PrivacyReport:
    theta = np.zeros(enc.n) if theta is None else np.asarray(theta, dtype=float)
    q = qfim(rho, enc, theta, allow_finite_difference)
    a = enc.unit_a
    P = privacy_measure(q, a)
    fit = qfim_alignment_fit(q, a)
    tr = float(np.trace(q))
    bound = alignment_bound(enc.n, fit.eps_star, tr)
    return PrivacyReport(
        P=P,
        eps_bugalho=bugalho_epsilon(P, privacy_deficit(q, a)),
        eps_hassani_pairwise=hassani_epsilon(rho, enc, theta, "pairwise", allow_finite_difference),
        eps_hassani_commutator=hassani_epsilon(rho, enc, theta, "commutator") if enc.is_unitary else None,
        k_star=fit.k_star,
        eps_star=fit.eps_star,
        alignment_bound=bound.stated,
        alignment_bound_chain=bound.chain,
        trace_q=tr,
        qfim=q,
    )


# ---------------------------------------------------------------------------
# honest measurement statistics


def outcome_distribution(rho: qc.DensityMatrix, enc: EncodingFamily, theta) -> np.ndarray:
    """Probabilities of the ``2^n`` local-basis outcomes, indexed by the bitstring value."""
    m = encode_state(rho, enc, theta).matrix
    u = BASES[enc.basis].conj().T
    for i in range(enc.n):
        m = qc.conjugate(m, u, [i], rho.dims)
    p = np.clip(np.diag(m).real, 0, None)
    return p / p.sum()


def combined_bit_probability(rho, enc, theta) -> float:
    """Probability that the combined outcome ``g(o)`` is 0."""
    p = outcome_distribution(rho, enc, theta)
    total = 0.0
    for idx, bits in enumerate(itertools.product((0, 1), repeat=enc.n)):
        if enc.g(bits) == 0:
            total += p[idx]
    return float(total)


def sample_outcomes(rho, enc, theta, rounds: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``rounds`` i.i.d. honest outcome bitstrings, shape ``(rounds, n)``."""
    p = outcome_distribution(rho, enc, theta)
    idx = rng.choice(p.size, size=rounds, p=p)
    shifts = np.arange(enc.n - 1, -1, -1)
    return (idx[:, None] >> shifts) & 1


def estimate_mean_phase(even_fraction: float, n: int) -> float:
    """Invert ``Pr(even) = (1 + cos(n x))/2`` on the branch ``n x in [0, pi]``."""
    c = min(max(2 * even_fraction - 1, -1.0), 1.0)
    return math.acos(c) / n
