"""Executable abstract-cryptography systems for private distributed sensing.

A composed system is a resource (ideal or concrete) with converters
attached to some of its party interfaces.  Every component is a generator
that yields :class:`Send` and :class:`Recv` operations; a deterministic
scheduler runs them in a fixed order and logs every message.  Interfaces
are named ``int:mu`` (between a converter and the resource) and ``ext:mu``
(between a converter and the outside world).  An interface with only one
attached component is *open*: the caller's inputs or strategy sits on the
other side.  Direction ``in`` always points towards the resource.

Randomness never comes from a global generator.  Components ask a
*chooser* for each random decision, which either samples from seeded
per-component streams or replays a forced sequence of choices.  Forcing
is what lets :func:`cq_output` enumerate every branch of a run exactly.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
import zlib
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import qcore as qc
from .config import DEFAULT_TOLERANCES as TOL
from .errors import BranchOverflowError, InvariantError, ProtocolAbort, WiringError
from .metrology import BASES, EncodingFamily, parity

ANGLE, BIT, BITS, REAL, QUBIT = "angle", "bit", "bits", "real", "qubit"
PAYLOAD_TYPES = (ANGLE, BIT, BITS, REAL, QUBIT)
TWO_PI = 2 * math.pi

RESOURCES = ("IdealMean", "ConcreteR", "IdealGeneral", "ConcreteGeneral")
CONVERTERS = ("HonestPi", "FilterDiamond", "SimHonest", "SimDishonest")
_IDEAL = {"IdealMean", "IdealGeneral"}
_GENERAL = {"IdealGeneral", "ConcreteGeneral"}

# The literal per-party gate of the GHZ mean protocol, |0><0| + e^{i theta}|1><1|.
def literal_phase_gate(theta: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, cmath.exp(1j * theta)]], dtype=complex)


def ext(mu: int) -> str:
    return f"ext:{mu}"


def inner(mu: int) -> str:
    return f"int:{mu}"


def party_of(interface: str) -> int:
    return int(interface.split(":", 1)[1])


# ---------------------------------------------------------------------------
# messages and operations


class Message(NamedTuple):
    round: int
    interface: str
    direction: str
    payload_type: str
    payload: Any

    def record(self) -> dict:
        payload = list(self.payload) if isinstance(self.payload, tuple) else self.payload
        return {"round": self.round, "interface": self.interface, "direction": self.direction,
                "payload_type": self.payload_type, "payload": payload}


class Send(NamedTuple):
    interface: str
    payload_type: str
    payload: Any
    round: int


class Recv(NamedTuple):
    interface: str
    payload_type: str
    round: int


class Request(NamedTuple):
    """What the outside world is asked to supply on an open interface."""

    party: int
    interface: str
    payload_type: str
    round: int


def check_payload(ptype: str, value):
    """Coerce ``value`` to the canonical form of ``ptype``; raise ProtocolAbort if out of domain."""
    try:
        if ptype == ANGLE:
            v = float(value)
            if not (0 <= v < TWO_PI) or not math.isfinite(v):
                raise ProtocolAbort(f"angle {value!r} outside [0, 2pi)")
            return v
        if ptype == BIT:
            if isinstance(value, (bool, np.bool_)) or int(value) != value or int(value) not in (0, 1):
                raise ProtocolAbort(f"bit {value!r} not in {{0, 1}}")
            return int(value)
        if ptype == BITS:
            bits = tuple(int(b) for b in value)
            if any(b not in (0, 1) for b in bits) or any(int(b) != b for b in value):
                raise ProtocolAbort(f"bitstring {value!r} has non-bit entries")
            return bits
        if ptype == REAL:
            v = float(value)
            if not math.isfinite(v):
                raise ProtocolAbort(f"real {value!r} not finite")
            return v
        if ptype == QUBIT:
            return str(value)
    except (TypeError, ValueError) as exc:
        raise ProtocolAbort(f"payload {value!r} is not a valid {ptype}") from exc
    raise InvariantError(f"unknown payload type {ptype!r}")


# ---------------------------------------------------------------------------
# randomness


def stream_for(seed: int, label: str) -> np.random.Generator:
    """Labelled split of the run seed: one independent stream per component label."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(label.encode()),))
    return np.random.default_rng(ss)


class SampledChoices:
    """Draws every random decision from seeded per-label streams.

    Decisions carrying a ``key`` are cached, so components that share a key
    (the filters' common coin) see the same outcome.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}
        self._cache: dict = {}

    def choose(self, label: str, probs, key=None) -> int:
        if key is not None and key in self._cache:
            return self._cache[key]
        rng = self._streams.get(label)
        if rng is None:
            rng = self._streams[label] = stream_for(self.seed, label)
        if len(probs) == 2:
            p0, p1 = probs
            idx = 0 if rng.random() * (p0 + p1) < p0 else 1
            if (p0, p1)[idx] <= 0:
                idx = 1 - idx
            if key is not None:
                self._cache[key] = idx
            return idx
        p = np.asarray(probs, dtype=float)
        idx = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        idx = min(idx, p.size - 1)
        while p[idx] <= 0:  # rounding guard: never land on an impossible outcome
            idx -= 1
        if key is not None:
            self._cache[key] = idx
        return idx


class ForcedChoices:
    """Replays a fixed prefix of decisions, then takes the first possible outcome."""

    def __init__(self, prefix: Sequence[int] = ()):
        self.prefix = tuple(prefix)
        self.path: list[tuple[np.ndarray, int]] = []
        self._cache: dict = {}

    def choose(self, label: str, probs, key=None) -> int:
        if key is not None and key in self._cache:
            return self._cache[key]
        p = np.asarray(probs, dtype=float)
        p = np.where(p > TOL.rank_cutoff, p, 0.0)
        p = p / p.sum()
        k = len(self.path)
        if k < len(self.prefix):
            idx = self.prefix[k]
        else:
            idx = int(np.flatnonzero(p)[0])
        self.path.append((p, idx))
        if key is not None:
            self._cache[key] = idx
        return idx

    @property
    def probability(self) -> float:
        return float(math.prod(p[i] for p, i in self.path))


# ---------------------------------------------------------------------------
# quantum world


_WEIGHTS: dict = {}


def _block_weights(basis: np.ndarray) -> np.ndarray:
    """Row ``o`` holds the weights of ``<b_o| . |b_o>`` on the ``(j, k)`` blocks of one qubit."""
    key = basis.tobytes()
    w = _WEIGHTS.get(key)
    if w is None:
        w = _WEIGHTS[key] = np.einsum("jo,ko->ojk", basis.conj(), basis).reshape(2, 4)
    return w


class QuantumWorld:
    """Joint density matrix of every live qubit, addressed by string handles."""

    def __init__(self):
        self.labels: list[str] = []
        self.mat = np.ones((1, 1), dtype=complex)
        self._counter = itertools.count()

    def add(self, matrix: np.ndarray, prefix: str) -> list[str]:
        k = int(matrix.shape[0]).bit_length() - 1
        new = [f"{prefix}#{next(self._counter)}" for _ in range(k)]
        if 2 ** (len(self.labels) + k) > TOL.max_dim:
            raise InvariantError("quantum world exceeds the configured dimension limit")
        self.mat = np.array(matrix, dtype=complex) if not self.labels else np.kron(self.mat, matrix)
        self.labels.extend(new)
        return new

    def _axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvariantError(f"qubit {label!r} is not live") from None

    def _split(self, label: str):
        """Axis of ``label`` and the six-index view ``(A, 2, B, A, 2, B)`` of the state."""
        ax = self._axis(label)
        a, b = 2**ax, 2 ** (len(self.labels) - ax - 1)
        return ax, self.mat.reshape(a, 2, b, a, 2, b)

    def _conjugate(self, op: np.ndarray) -> Callable:
        def act(t):
            t = np.einsum("ij,ajbckd->aibckd", op, t)
            return np.einsum("ajbckd,lk->ajbcld", t, op.conj())
        return act

    def apply(self, label: str, op: np.ndarray) -> None:
        """Conjugate one qubit by a single-qubit operator."""
        _, t = self._split(label)
        op = np.asarray(op, dtype=complex)
        if op[0, 1] == 0 and op[1, 0] == 0:
            d = op.diagonal()
            t = t * np.multiply.outer(d, d.conj())[None, :, None, None, :, None]
        else:
            t = self._conjugate(op)(t)
        self.mat = t.reshape(self.mat.shape)

    def apply_channel(self, label: str, channel) -> None:
        """Apply a :class:`~privsense.qcore.Channel`, or a unitary given as a matrix."""
        if isinstance(channel, np.ndarray):
            return self.apply(label, channel)
        _, t = self._split(label)
        self.mat = sum(self._conjugate(k)(t) for k in channel.kraus_ops).reshape(self.mat.shape)

    def measure(self, label: str, basis: np.ndarray, chooser, tape: str) -> int:
        """Measure in the basis given by the columns of ``basis``; the qubit is consumed."""
        ax, t = self._split(label)
        side = self.mat.shape[0] // 2
        w = _block_weights(basis)
        blocks = (w @ t.transpose(1, 4, 0, 2, 3, 5).reshape(4, -1)).reshape(2, side, side)
        diag = blocks.reshape(2, -1)[:, :: side + 1].sum(axis=1).real
        probs = (max(float(diag[0]), 0.0), max(float(diag[1]), 0.0))
        o = chooser.choose(tape, probs)
        self.mat = blocks[o] / probs[o]
        del self.labels[ax]
        return o

    def discard(self, labels: Iterable[str]) -> None:
        drop = set(labels)
        keep = [i for i, lab in enumerate(self.labels) if lab not in drop]
        self.mat = qc.partial_trace_matrix(self.mat, (2,) * len(self.labels), keep) if keep else np.ones((1, 1))
        self.labels = [self.labels[i] for i in keep]

    def reduced(self, handles: Sequence[str], names: Sequence) -> qc.DensityMatrix:
        """Reduced state on ``handles`` in the given order, with register names ``names``."""
        axes = [self._axis(h) for h in handles]
        k = len(self.labels)
        m = qc.partial_trace_matrix(self.mat, (2,) * k, sorted(axes))
        order = sorted(range(len(axes)), key=lambda i: axes[i])  # positions in sorted order
        perm = [order.index(i) for i in range(len(axes))]
        r = len(axes)
        t = m.reshape((2,) * (2 * r)).transpose(perm + [p + r for p in perm])
        return qc.DensityMatrix(t.reshape(2**r, 2**r), parties=tuple(names), validate=False)


# ---------------------------------------------------------------------------
# behaviours


class Context(NamedTuple):
    world: QuantumWorld
    chooser: Any
    rounds: int


class Behavior:
    """A component of a composed system: a generator plus its message automaton."""

    kind = "behavior"

    def __init__(self, label: str, inner_ifaces: Sequence[str], outer_ifaces: Sequence[str]):
        self.label = label
        self.inner_ifaces = tuple(inner_ifaces)  # interfaces where this component faces outward
        self.outer_ifaces = tuple(outer_ifaces)  # interfaces where this component faces the resource

    def run(self, ctx: Context):
        raise NotImplementedError

    def pattern(self, rounds: int) -> dict[str, list[tuple[int, str, str]]]:
        """Expected ``(round, direction, payload_type)`` sequence on each interface."""
        raise NotImplementedError


def _rounds(rounds):
    return range(1, rounds + 1)


def _recv_all(ifaces, ptype, r):
    out = []
    for iface in ifaces:
        out.append((yield Recv(iface, ptype, r)))
    return out


class IdealResource(Behavior):
    """Receives one angle per party per call and returns ``a . theta`` (or the mean) to all."""

    def __init__(self, n: int, a: np.ndarray, schedule: Sequence[int], mean: bool):
        super().__init__("ideal", [inner(mu) for mu in range(1, n + 1)], [])
        self.n, self.a, self.schedule, self.mean = n, np.asarray(a, float), tuple(schedule), mean

    def run(self, ctx):
        parties = range(1, self.n + 1)
        for r in self.schedule:
            theta = yield from _recv_all([inner(mu) for mu in parties], ANGLE, r)
            value = sum(theta) / self.n if self.mean else float(np.dot(self.a, theta))
            for mu in parties:
                yield Send(inner(mu), REAL, value, r)

    def pattern(self, rounds):
        seq = [x for r in self.schedule for x in ((r, "in", ANGLE), (r, "out", REAL))]
        return {i: list(seq) for i in self.inner_ifaces}


class ConcreteResource(Behavior):
    """Each round: hand out one qubit of ``rho`` per party, collect bits, broadcast them."""

    def __init__(self, n: int, rho: qc.DensityMatrix):
        super().__init__("resource", [inner(mu) for mu in range(1, n + 1)], [])
        self.n, self.rho = n, rho

    def run(self, ctx):
        parties = range(1, self.n + 1)
        for i in _rounds(ctx.rounds):
            handles = ctx.world.add(self.rho.matrix, f"r{i}")
            for mu, h in zip(parties, handles):
                yield Send(inner(mu), QUBIT, h, i)
            bits = tuple((yield from _recv_all([inner(mu) for mu in parties], BIT, i)))
            for mu in parties:
                yield Send(inner(mu), BITS, bits, i)

    def pattern(self, rounds):
        seq = [x for i in _rounds(rounds) for x in ((i, "out", QUBIT), (i, "in", BIT), (i, "out", BITS))]
        return {i: list(seq) for i in self.inner_ifaces}


class HonestProtocol(Behavior):
    """Honest party: encode, measure locally, report, and output ``g`` of each broadcast.

    ``per_round_input`` selects between receiving the parameter once (mean
    protocol) or once per round (general protocol).
    """

    def __init__(self, mu: int, gate: Callable[[float], qc.Channel], basis: np.ndarray,
                 g: Callable, per_round_input: bool):
        super().__init__(f"honest:{mu}", [ext(mu)], [inner(mu)])
        self.mu, self.gate, self.basis, self.g, self.per_round = mu, gate, basis, g, per_round_input

    def run(self, ctx):
        e, i_ = ext(self.mu), inner(self.mu)
        theta = None if self.per_round else (yield Recv(e, ANGLE, 0))
        p = []
        gate, gate_theta = None, None
        for i in _rounds(ctx.rounds):
            if self.per_round:
                theta = yield Recv(e, ANGLE, i)
            if gate is None or theta != gate_theta:
                gate, gate_theta = self.gate(theta), theta
            q = yield Recv(i_, QUBIT, i)
            ctx.world.apply_channel(q, gate)
            o = ctx.world.measure(q, self.basis, ctx.chooser, self.label)
            yield Send(i_, BIT, o, i)
            bits = yield Recv(i_, BITS, i)
            p.append(int(self.g(bits)))
        yield Send(e, BITS, tuple(p), ctx.rounds)

    def pattern(self, rounds):
        head = [(i, "in", ANGLE) for i in _rounds(rounds)] if self.per_round else [(0, "in", ANGLE)]
        return {
            ext(self.mu): head + [(rounds, "out", BITS)],
            inner(self.mu): [x for i in _rounds(rounds)
                             for x in ((i, "out", QUBIT), (i, "in", BIT), (i, "out", BITS))],
        }


class Filter(Behavior):
    """Turns the ideal output into ``N`` bits with the honest combined-bit law.

    All filters draw from one shared coin per round, so every honest
    interface sees the same bitstring.
    """

    def __init__(self, mu: int, zero_probability: Callable[[float], float]):
        super().__init__(f"filter:{mu}", [ext(mu)], [inner(mu)])
        self.mu, self.zero_probability = mu, zero_probability

    def run(self, ctx):
        theta = yield Recv(ext(self.mu), ANGLE, 0)
        yield Send(inner(self.mu), ANGLE, theta, 0)
        value = yield Recv(inner(self.mu), REAL, 0)
        p0 = min(max(self.zero_probability(value), 0.0), 1.0)
        f = tuple(ctx.chooser.choose("diamond", [p0, 1 - p0], key=("diamond", i)) for i in _rounds(ctx.rounds))
        yield Send(ext(self.mu), BITS, f, ctx.rounds)

    def pattern(self, rounds):
        return {ext(self.mu): [(0, "in", ANGLE), (rounds, "out", BITS)],
                inner(self.mu): [(0, "in", ANGLE), (0, "out", REAL)]}


class HonestSimulator(Behavior):
    """Forwards the honest angle to the ideal resource, then decodes one signalled bit per round.

    The decoded bit is 0 exactly when the resource returns 0.
    """

    def __init__(self, mu: int, general: bool, tol: float = 1e-12):
        super().__init__(f"sim_honest:{mu}", [ext(mu)], [inner(mu)])
        self.mu, self.general, self.tol = mu, general, tol

    def run(self, ctx):
        e, i_ = ext(self.mu), inner(self.mu)
        p = []
        if not self.general:
            theta = yield Recv(e, ANGLE, 0)
            yield Send(i_, ANGLE, theta, 0)
            yield Recv(i_, REAL, 0)
        for i in _rounds(ctx.rounds):
            if self.general:
                theta = yield Recv(e, ANGLE, i)
                yield Send(i_, ANGLE, theta, i)
                yield Recv(i_, REAL, i)
            yield Send(i_, ANGLE, 0.0, i)
            value = yield Recv(i_, REAL, i)
            p.append(0 if abs(value) < self.tol else 1)
        yield Send(e, BITS, tuple(p), ctx.rounds)

    def pattern(self, rounds):
        call = lambda r: [(r, "in", ANGLE), (r, "out", REAL)]  # noqa: E731
        if self.general:
            return {ext(self.mu): [(i, "in", ANGLE) for i in _rounds(rounds)] + [(rounds, "out", BITS)],
                    inner(self.mu): [x for i in _rounds(rounds) for x in call(i) + call(i)]}
        return {ext(self.mu): [(0, "in", ANGLE), (rounds, "out", BITS)],
                inner(self.mu): call(0) + [x for i in _rounds(rounds) for x in call(i)]}


class _DishonestSimulatorBase(Behavior):
    def __init__(self, n: int, dishonest: Sequence[int]):
        dishonest = tuple(sorted(dishonest))
        super().__init__("sim_dishonest", [ext(mu) for mu in dishonest], [inner(mu) for mu in dishonest])
        self.n = n
        self.dishonest = dishonest
        self.honest = tuple(mu for mu in range(1, n + 1) if mu not in dishonest)

    def _call(self, r, values):
        for mu, v in zip(self.dishonest, values):
            yield Send(inner(mu), ANGLE, v, r)
        out = yield from _recv_all([inner(mu) for mu in self.dishonest], REAL, r)
        return out[0]

    def _serve(self, ctx, i, state):
        """Hand out the dishonest qubits and collect the reported bits."""
        handles = ctx.world.add(state, f"sim{i}")
        for mu, h in zip(self.dishonest, handles):
            yield Send(ext(mu), QUBIT, h, i)
        return (yield from _recv_all([ext(mu) for mu in self.dishonest], BIT, i))

    def _broadcast(self, i, honest_bits, dishonest_bits):
        full = dict(zip(self.honest, honest_bits)) | dict(zip(self.dishonest, dishonest_bits))
        bits = tuple(full[mu] for mu in range(1, self.n + 1))
        for mu in self.dishonest:
            yield Send(ext(mu), BITS, bits, i)
        return bits

    def _ext_pattern(self, rounds):
        return [x for i in _rounds(rounds) for x in ((i, "out", QUBIT), (i, "in", BIT), (i, "out", BITS))]


class DishonestSimulatorMean(_DishonestSimulatorBase):
    """Rebuilds the dishonest view of the GHZ mean protocol from the honest mean alone."""

    def run(self, ctx):
        d = len(self.dishonest)
        mean0 = yield from self._call(0, [0.0] * d)
        phase = self.n * mean0
        for i in _rounds(ctx.rounds):
            hbits = [ctx.chooser.choose(self.label, [0.5, 0.5]) for _ in self.honest]
            h = parity(hbits)
            ket = np.zeros(2**d, dtype=complex)
            ket[0] = 1 / math.sqrt(2)
            ket[-1] = (-1) ** h * np.exp(1j * phase) / math.sqrt(2)
            obits = yield from self._serve(ctx, i, np.outer(ket, ket.conj()))
            p = parity(obits) ^ h
            yield from self._call(i, [p * math.pi / d] * d)
            yield from self._broadcast(i, hbits, obits)

    def pattern(self, rounds):
        call = lambda r: [(r, "in", ANGLE), (r, "out", REAL)]  # noqa: E731
        seq = call(0) + [x for i in _rounds(rounds) for x in call(i)]
        out = {inner(mu): list(seq) for mu in self.dishonest}
        out.update({ext(mu): self._ext_pattern(rounds) for mu in self.dishonest})
        return out


class DishonestSimulatorGeneral(_DishonestSimulatorBase):
    """Rebuilds the dishonest view for ``f = a . theta`` using substitute honest angles.

    Each round makes two calls to the ideal resource: one that learns
    ``f`` of the honest angles, one that signals the combined bit.
    """

    def __init__(self, n, dishonest, enc: EncodingFamily, rho: qc.DensityMatrix):
        super().__init__(n, dishonest)
        self.enc, self.rho = enc, rho
        self.weight = float(sum(enc.a[mu - 1] for mu in self.dishonest))
        if abs(self.weight) < 1e-12:
            raise WiringError("the dishonest entries of a sum to zero; the combined bit cannot be signalled")

    def substitute_angles(self, f0: float) -> dict[int, float]:
        """Canonical honest angles with ``a_H . theta_H = f0``, reduced mod 2 pi."""
        a_h = np.array([self.enc.a[mu - 1] for mu in self.honest])
        return {mu: float(np.mod(f0 * self.enc.a[mu - 1] / (a_h @ a_h), TWO_PI)) for mu in self.honest}

    def run(self, ctx):
        d = len(self.dishonest)
        basis = BASES[self.enc.basis]
        for i in _rounds(ctx.rounds):
            f0 = yield from self._call(i, [0.0] * d)
            angles = self.substitute_angles(f0)
            handles = ctx.world.add(self.rho.matrix, f"sim{i}")
            hbits = []
            for mu in self.honest:
                gate = self.enc.unitary(mu, angles[mu]) if self.enc.is_unitary else self.enc.channel(mu, angles[mu])
                ctx.world.apply_channel(handles[mu - 1], gate)
                hbits.append(ctx.world.measure(handles[mu - 1], basis, ctx.chooser, self.label))
            for mu in self.dishonest:
                yield Send(ext(mu), QUBIT, handles[mu - 1], i)
            obits = yield from _recv_all([ext(mu) for mu in self.dishonest], BIT, i)
            full = dict(zip(self.honest, hbits)) | dict(zip(self.dishonest, obits))
            p = int(self.enc.g(tuple(full[mu] for mu in range(1, self.n + 1))))
            yield from self._call(i, [p * math.pi / d] * d)
            yield from self._broadcast(i, hbits, obits)

    def pattern(self, rounds):
        call = lambda r: [(r, "in", ANGLE), (r, "out", REAL)]  # noqa: E731
        seq = [x for i in _rounds(rounds) for x in call(i) + call(i)]
        out = {inner(mu): list(seq) for mu in self.dishonest}
        out.update({ext(mu): self._ext_pattern(rounds) for mu in self.dishonest})
        return out


# ---------------------------------------------------------------------------
# system specification and wiring


@dataclass(frozen=True)
class PartyPartition:
    n: int
    honest: frozenset
    dishonest: frozenset

    def __post_init__(self):
        h, d = frozenset(self.honest), frozenset(self.dishonest)
        object.__setattr__(self, "honest", h)
        object.__setattr__(self, "dishonest", d)
        if h & d:
            raise InvariantError(f"parties {sorted(h & d)} are both honest and dishonest")
        if h | d != frozenset(range(1, self.n + 1)):
            raise InvariantError(f"partition does not cover parties 1..{self.n}")

    @classmethod
    def last_dishonest(cls, n: int, count: int = 1) -> "PartyPartition":
        return cls(n, frozenset(range(1, n - count + 1)), frozenset(range(n - count + 1, n + 1)))

    def require_adversary(self) -> None:
        if not self.dishonest:
            raise InvariantError("security experiments need at least one dishonest party")


@dataclass(frozen=True)
class SystemSpec:
    """Resource id plus a converter id per party; parties without one stay open."""

    resource: str
    converters: Mapping[int, str] = field(default_factory=dict)
    open_interfaces: tuple | None = None  # optional declared wiring, checked at build time

    @classmethod
    def real(cls, partition: PartyPartition, general: bool = False) -> "SystemSpec":
        """Honest protocol on the honest parties, dishonest interfaces open."""
        return cls("ConcreteGeneral" if general else "ConcreteR",
                   {mu: "HonestPi" for mu in sorted(partition.honest)})

    @classmethod
    def all_honest(cls, n: int, general: bool = False) -> "SystemSpec":
        return cls("ConcreteGeneral" if general else "ConcreteR", {mu: "HonestPi" for mu in range(1, n + 1)})

    @classmethod
    def filtered_ideal(cls, n: int, general: bool = False) -> "SystemSpec":
        return cls("IdealGeneral" if general else "IdealMean", {mu: "FilterDiamond" for mu in range(1, n + 1)})

    @classmethod
    def simulated(cls, partition: PartyPartition, general: bool = False) -> "SystemSpec":
        conv = {mu: "SimHonest" for mu in partition.honest} | {mu: "SimDishonest" for mu in partition.dishonest}
        return cls("IdealGeneral" if general else "IdealMean", dict(sorted(conv.items())))


class Transcript(NamedTuple):
    rounds: int
    messages: tuple
    outputs: dict  # party -> tuple of outbound (payload_type, payload) on its open interface
    registers: qc.DensityMatrix | None  # held qubits, registers named (party, round)
    aborted: str | None
    observation: tuple

    def by_interface(self) -> dict[str, list[Message]]:
        out: dict[str, list[Message]] = {}
        for m in self.messages:
            out.setdefault(m.interface, []).append(m)
        return out

    def final_bits(self, party: int):
        """Last classical bitstring delivered to ``party``'s open interface."""
        for ptype, payload in reversed(self.outputs.get(party, ())):
            if ptype == BITS:
                return payload
        return None


class Strategy:
    """Outside-world behaviour on the open interfaces.

    ``respond`` supplies values requested by the system; ``observe`` sees
    every outbound message first and may measure received qubits through
    ``view``.
    """

    def respond(self, request: Request, view: "EnvironmentView"):
        raise NotImplementedError

    def observe(self, party: int, message: Message, view: "EnvironmentView") -> None:
        return None


class EnvironmentView:
    def __init__(self, world: QuantumWorld, chooser, held: list):
        self._world, self._chooser, self._held = world, chooser, held

    def measure(self, handle: str, basis: str | np.ndarray = "z") -> int:
        """Measure a qubit the outside world holds; the qubit is consumed."""
        u = BASES[basis] if isinstance(basis, str) else np.asarray(basis, dtype=complex)
        o = self._world.measure(handle, u, self._chooser, "environment")
        self._held[:] = [x for x in self._held if x[2] != handle]
        return o

    def held(self) -> list[tuple[int, int, str]]:
        return list(self._held)


class _Environment:
    def __init__(self, inputs, world, chooser, hold_qubits: bool):
        self.strategy = inputs if isinstance(inputs, Strategy) else None
        self.inputs = {} if self.strategy else dict(inputs or {})
        self._queues: dict[int, deque] = {}
        self.world, self.hold = world, hold_qubits
        self.held: list[tuple[int, int, str]] = []
        self.view = EnvironmentView(world, chooser, self.held)

    def respond(self, req: Request):
        if self.strategy is not None:
            return self.strategy.respond(req, self.view)
        if req.party not in self.inputs:
            raise InvariantError(f"open interface of party {req.party} is not served by any input")
        v = self.inputs[req.party]
        if isinstance(v, Strategy):
            return v.respond(req, self.view)
        if callable(v):
            return v(req)
        if isinstance(v, (list, tuple)):
            q = self._queues.setdefault(req.party, deque(v))
            if not q:
                raise InvariantError(f"input sequence for party {req.party} ran out")
            return q.popleft()
        return v

    def deliver(self, party: int, msg: Message) -> None:
        if msg.payload_type == QUBIT:
            self.held.append((party, msg.round, msg.payload))
        s = self.strategy or (self.inputs.get(party) if isinstance(self.inputs.get(party), Strategy) else None)
        if s is not None:
            s.observe(party, msg, self.view)
        if msg.payload_type == QUBIT and not self.hold and msg.payload in self.world.labels:
            self.world.discard([msg.payload])
            self.held[:] = [x for x in self.held if x[2] != msg.payload]


def _observation(outputs: Mapping[int, tuple]) -> tuple:
    return tuple((p, tuple((t, "Q" if t == QUBIT else v) for t, v in outputs[p])) for p in sorted(outputs))


class ComposedSystem:
    """A wired, runnable network of behaviours."""

    def __init__(self, spec: SystemSpec, enc: EncodingFamily, rho: qc.DensityMatrix | None, rounds: int,
                 seed: int, factory: Callable[[], list[Behavior]], open_parties: dict[int, str]):
        self.spec, self.enc, self.rho, self.rounds, self.seed = spec, enc, rho, rounds, seed
        self._factory = factory
        self.open_parties = open_parties  # party -> open interface name

    @property
    def n(self) -> int:
        return self.enc.n

    @property
    def open_interfaces(self) -> tuple:
        return tuple(self.open_parties[p] for p in sorted(self.open_parties))

    def pattern(self) -> dict[str, list[tuple[int, str, str]]]:
        out: dict = {}
        for b in self._factory():
            out.update(b.pattern(self.rounds))
        return out

    def execute(self, inputs=None, seed: int | None = None, hold_qubits: bool | None = None,
                chooser=None) -> Transcript:
        chooser = chooser if chooser is not None else SampledChoices(self.seed if seed is None else seed)
        hold = self.rounds == 1 if hold_qubits is None else hold_qubits
        world = QuantumWorld()
        ctx = Context(world, chooser, self.rounds)
        env = _Environment(inputs, world, chooser, hold)
        behaviors = self._factory()
        # per behaviour: interface -> (direction of its sends, direction it receives)
        flow = {id(b): {**{i: ("out", "in") for i in b.inner_ifaces}, **{i: ("in", "out") for i in b.outer_ifaces}}
                for b in behaviors}
        queues: dict[tuple[str, str], deque] = {}
        log: list[Message] = []
        outputs: dict[int, list] = {p: [] for p in self.open_parties}
        open_ifaces = {v: k for k, v in self.open_parties.items()}
        gens = [(b, b.run(ctx)) for b in behaviors]
        pending: dict[int, Any] = {}
        aborted = None
        try:
            for b, g in gens:
                pending[id(b)] = next(g)
            live = list(gens)
            while live:
                progressed = False
                still = []
                for b, g in live:
                    op = pending[id(b)]
                    sides = flow[id(b)]
                    done = False
                    while True:
                        if isinstance(op, Send):
                            direction = sides[op.interface][0]
                            payload = check_payload(op.payload_type, op.payload)
                            msg = Message(op.round, op.interface, direction, op.payload_type, payload)
                            log.append(msg)
                            if op.interface in open_ifaces:
                                party = open_ifaces[op.interface]
                                outputs[party].append((op.payload_type, payload))
                                env.deliver(party, msg)
                            else:
                                queues.setdefault((op.interface, direction), deque()).append(msg)
                            value = None
                        else:
                            want = sides[op.interface][1]
                            q = queues.get((op.interface, want))
                            if q:
                                msg = q.popleft()
                                if msg.payload_type != op.payload_type:
                                    raise WiringError(f"{b.label} expected {op.payload_type} on {op.interface}, "
                                                      f"got {msg.payload_type}")
                                value = msg.payload
                            elif op.interface in open_ifaces:
                                party = open_ifaces[op.interface]
                                req = Request(party, op.interface, op.payload_type, op.round)
                                value = check_payload(op.payload_type, env.respond(req))
                                log.append(Message(op.round, op.interface, want, op.payload_type, value))
                            else:
                                break
                        progressed = True
                        try:
                            op = g.send(value)
                        except StopIteration:
                            done = True
                            break
                    pending[id(b)] = op
                    if not done:
                        still.append((b, g))
                if still and not progressed:
                    raise WiringError("composed system deadlocked: " +
                                      ", ".join(f"{b.label} waits on {pending[id(b)].interface}" for b, _ in still))
                live = still
        except ProtocolAbort as exc:
            aborted = str(exc)
        registers = None
        held = sorted(h for h in env.held if h[2] in world.labels)
        if held and aborted is None:
            registers = world.reduced([h[2] for h in held], [(p, r) for p, r, _ in held])
        outs = {p: tuple(v) for p, v in outputs.items()}
        return Transcript(self.rounds, tuple(log), outs, registers, aborted, _observation(outs))


def build_system(spec: SystemSpec, enc: EncodingFamily, rho: qc.DensityMatrix | None = None,
                 rounds: int = 1, seed: int = 0) -> ComposedSystem:
    """Wire a resource and its converters into a runnable system."""
    n = enc.n
    if spec.resource not in RESOURCES:
        raise WiringError(f"unknown resource {spec.resource!r}")
    for mu, cid in spec.converters.items():
        if cid not in CONVERTERS:
            raise WiringError(f"unknown converter {cid!r} on party {mu}")
        if not (isinstance(mu, (int, np.integer)) and 1 <= mu <= n):
            raise WiringError(f"converter attached to party {mu!r}, outside 1..{n}")
    if rounds < 1:
        raise WiringError("a system needs at least one round")
    conv = {int(k): v for k, v in spec.converters.items()}
    kinds = set(conv.values())
    ideal = spec.resource in _IDEAL
    general = spec.resource in _GENERAL
    if ideal and "HonestPi" in kinds:
        raise WiringError("HonestPi attaches to a concrete resource, not an ideal one")
    if not ideal and kinds - {"HonestPi"}:
        raise WiringError(f"concrete resources accept only HonestPi, got {sorted(kinds - {'HonestPi'})}")
    if "FilterDiamond" in kinds and kinds & {"SimHonest", "SimDishonest"}:
        raise WiringError("filters and simulators cannot share one ideal resource")
    sims = kinds & {"SimHonest", "SimDishonest"}
    if sims and len(conv) != n:
        raise WiringError("simulated systems need a simulator on every interface")
    if sims and "SimDishonest" not in kinds:
        raise WiringError("simulated systems need at least one dishonest simulator interface")
    if spec.resource == "IdealMean" and not enc.mean_mode:
        raise WiringError("IdealMean needs the mean encoding")
    if spec.resource == "ConcreteR":
        ghz = qc.ghz_state(n)
        if rho is not None and (rho.dim != ghz.dim or np.max(np.abs(rho.matrix - ghz.matrix)) > 1e-9):
            raise WiringError("ConcreteR distributes the GHZ state; use ConcreteGeneral for other states")
        rho = ghz
    if spec.resource == "ConcreteGeneral" or (general and "SimDishonest" in kinds):
        if rho is None:
            raise WiringError(f"{spec.resource} needs a shared state")
        if rho.dims != (2,) * n:
            raise WiringError(f"state has registers {rho.dims}, expected {n} qubits")

    dishonest = sorted(mu for mu, c in conv.items() if c == "SimDishonest")
    if "SimDishonest" in kinds and general:
        DishonestSimulatorGeneral(n, dishonest, enc, rho)  # early check of the signalling guard

    if ideal and sims:
        schedule = [0] + list(_rounds(rounds)) if not general else [r for i in _rounds(rounds) for r in (i, i)]
    else:
        schedule = [0]

    mean_gate = literal_phase_gate

    def zero_probability(value: float) -> float:
        if not general:
            return 0.5 * (1 + math.cos(n * value))
        from .metrology import combined_bit_probability

        theta = value * enc.a / float(enc.a @ enc.a)
        return combined_bit_probability(rho, enc, np.mod(theta, TWO_PI))

    if "FilterDiamond" in kinds and general and rho is None:
        raise WiringError("general filters need the shared state to reproduce the honest statistics")

    def factory() -> list[Behavior]:
        comps: list[Behavior] = []
        if ideal:
            comps.append(IdealResource(n, enc.a, schedule, mean=not general))
        else:
            comps.append(ConcreteResource(n, rho))
        for mu in sorted(conv):
            c = conv[mu]
            if c == "HonestPi":
                if general:
                    gate = (lambda t, m=mu: enc.unitary(m, t)) if enc.is_unitary else (lambda t, m=mu: enc.channel(m, t))
                    comps.append(HonestProtocol(mu, gate, BASES[enc.basis],
                                                enc.g, per_round_input=True))
                else:
                    comps.append(HonestProtocol(mu, mean_gate, BASES["x"], parity, per_round_input=False))
            elif c == "FilterDiamond":
                comps.append(Filter(mu, zero_probability))
            elif c == "SimHonest":
                comps.append(HonestSimulator(mu, general))
        if dishonest:
            if general:
                comps.append(DishonestSimulatorGeneral(n, dishonest, enc, rho))
            else:
                comps.append(DishonestSimulatorMean(n, dishonest))
        return comps

    open_parties = {mu: (ext(mu) if mu in conv else inner(mu)) for mu in range(1, n + 1)}
    system = ComposedSystem(spec, enc, rho, rounds, seed, factory, open_parties)
    if spec.open_interfaces is not None and tuple(spec.open_interfaces) != system.open_interfaces:
        raise WiringError(f"declared open interfaces {spec.open_interfaces} differ from wiring "
                          f"{system.open_interfaces}")
    return system


def execute(system: ComposedSystem, inputs=None, seed: int | None = None, **kwargs) -> Transcript:
    return system.execute(inputs, seed=seed, **kwargs)


# ---------------------------------------------------------------------------
# exact branch enumeration


class CQBranch(NamedTuple):
    probability: float
    state: qc.DensityMatrix | None
    messages: tuple  # the canonical observation: per open party, outbound (type, payload) pairs


def enumerate_runs(system: ComposedSystem, inputs, max_branches: int = TOL.max_branches):
    """Yield ``(probability, transcript)`` for every possible run, by depth-first replay."""
    stack: list[tuple[int, ...]] = [()]
    count = 0
    while stack:
        prefix = stack.pop()
        chooser = ForcedChoices(prefix)
        t = system.execute(inputs, chooser=chooser, hold_qubits=True)
        count += 1
        if count > max_branches:
            raise BranchOverflowError(f"more than {max_branches} branches")
        chosen = [i for _, i in chooser.path]
        for k in range(len(chooser.path) - 1, len(prefix) - 1, -1):
            p, idx = chooser.path[k]
            for j in range(p.size - 1, idx, -1):
                if p[j] > 0:
                    stack.append(tuple(chosen[:k]) + (j,))
        yield chooser.probability, t


def cq_output(system: ComposedSystem, inputs, max_branches: int = TOL.max_branches) -> dict:
    """Exact classical-quantum output: observation label -> :class:`CQBranch`."""
    acc: dict = {}
    for prob, t in enumerate_runs(system, inputs, max_branches):
        if t.aborted:
            raise ProtocolAbort(f"run aborted during enumeration: {t.aborted}")
        if prob <= 0:
            continue
        label = t.observation
        m = None if t.registers is None else prob * t.registers.matrix
        if label in acc:
            p0, m0, names = acc[label]
            acc[label] = (p0 + prob, None if m is None else m0 + m, names)
        else:
            acc[label] = (prob, m, None if t.registers is None else t.registers.parties)
    out = {}
    for label, (p, m, names) in acc.items():
        state = None if m is None else qc.DensityMatrix(m / p, parties=names, validate=False)
        out[label] = CQBranch(p, state, label)
    return out


# ---------------------------------------------------------------------------
# conformance checks and export


class Violation(NamedTuple):
    kind: str
    interface: str
    detail: str


def validate_transcript(t: Transcript, system: ComposedSystem) -> list[Violation]:
    """List every departure from the component automata, payload domains and combined-bit consistency."""
    out: list[Violation] = []
    expected = system.pattern()
    actual = {k: [(m.round, m.direction, m.payload_type) for m in v] for k, v in t.by_interface().items()}
    for iface in sorted(set(expected) | set(actual)):
        exp, act = expected.get(iface, []), actual.get(iface, [])
        if exp == act:
            continue
        remaining = list(act)
        missing = []
        for e in exp:
            if e in remaining:
                remaining.remove(e)
            else:
                missing.append(e)
        for e in missing:
            out.append(Violation("missing", iface, f"round {e[0]} {e[1]} {e[2]}"))
        for e in remaining:
            out.append(Violation("unexpected", iface, f"round {e[0]} {e[1]} {e[2]}"))
        if not missing and not remaining:
            out.append(Violation("order", iface, "messages out of automaton order"))
    for m in t.messages:
        if m.payload_type == QUBIT:
            continue
        try:
            v = check_payload(m.payload_type, m.payload)
        except ProtocolAbort as exc:
            out.append(Violation("domain", m.interface, str(exc)))
            continue
        if m.payload_type == BITS and m.direction == "out" and m.interface.startswith("int:") and \
                len(v) != system.n and system.spec.resource not in _IDEAL:
            out.append(Violation("domain", m.interface, f"broadcast has {len(v)} bits, expected {system.n}"))
    out.extend(_consistency(t, system))
    return out


def _consistency(t: Transcript, system: ComposedSystem) -> list[Violation]:
    """Every honest output bit must equal ``g`` of that round's broadcast outcomes."""
    g = parity if system.spec.resource in ("ConcreteR", "IdealMean") else system.enc.g
    broadcasts: dict[int, tuple] = {}
    for m in t.messages:
        if m.payload_type == BITS and m.direction == "out" and (
                (m.interface.startswith("int:") and system.spec.resource not in _IDEAL) or
                (m.interface.startswith("ext:") and system.spec.converters.get(party_of(m.interface)) == "SimDishonest")):
            broadcasts.setdefault(m.round, tuple(m.payload))
    out = []
    if not broadcasts:
        return out
    for mu, cid in system.spec.converters.items():
        if cid not in ("HonestPi", "SimHonest"):
            continue
        finals = [m for m in t.messages if m.interface == ext(mu) and m.payload_type == BITS and m.direction == "out"]
        if not finals:
            continue
        p = finals[-1].payload
        for i, bit in enumerate(p, start=1):
            if i in broadcasts and int(g(broadcasts[i])) != bit:
                out.append(Violation("consistency", ext(mu), f"round {i}: output {bit} but g(o) = "
                                                             f"{int(g(broadcasts[i]))}"))
    return out


def export_transcript(t: Transcript, path, register_file: str | None = None) -> Path:
    """Write one JSON record per message; held qubits go to a matrix file referenced by the last record."""
    path = Path(path)
    lines = [json.dumps(m.record(), sort_keys=True) for m in t.messages]
    if t.registers is not None:
        reg = Path(register_file) if register_file else path.with_suffix(".registers.mat")
        qc.save_matrix(reg, t.registers.matrix)
        lines.append(json.dumps({"round": t.rounds, "interface": "registers", "direction": "out",
                                 "payload_type": "matrix_file",
                                 "payload": {"file": reg.name, "registers": [list(p) for p in t.registers.parties]}},
                                sort_keys=True))
    if t.aborted:
        lines.append(json.dumps({"round": -1, "interface": "abort", "direction": "out",
                                 "payload_type": "reason", "payload": t.aborted}, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_transcript_messages(path) -> list[Message]:
    """Read back the message records of an exported transcript (register and abort records skipped)."""
    out = []
    for line in Path(path).read_text().splitlines():
        r = json.loads(line)
        if r["payload_type"] not in PAYLOAD_TYPES:
            continue
        payload = tuple(r["payload"]) if r["payload_type"] == BITS else r["payload"]
        out.append(Message(r["round"], r["interface"], r["direction"], r["payload_type"], payload))
    return out
