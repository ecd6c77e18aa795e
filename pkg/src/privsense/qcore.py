"""Dense density-matrix engine.

Ordering convention: party registers are tensored left to right in
``party_order``, so the first party is the most significant factor of the
computational-basis index (``|q1 q2 ... qn>``).  Every routine that takes a
set of party labels resolves them through this order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES as TOL
from .errors import DimensionError, InvariantError, RankChangeError

Label = Hashable


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex array, rejecting non-finite entries."""
    if isinstance(m, DensityMatrix):
        return m.matrix
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvariantError("matrix has NaN or infinite entries")
    return arr


def is_hermitian(m: np.ndarray, tol: float = TOL.hermitian) -> bool:
    return m.shape[0] == m.shape[1] and float(np.max(np.abs(m - m.conj().T), initial=0.0)) <= tol


def _qubit_count(dim: int) -> int:
    k = dim.bit_length() - 1
    if dim < 1 or 2**k != dim:
        raise DimensionError(f"dimension {dim} is not a power of two; pass dims explicitly")
    return k


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated state on an ordered list of party registers."""

    matrix: np.ndarray
    parties: tuple = None
    dims: tuple = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        dim = m.shape[0]
        if dim > TOL.max_dim:
            raise DimensionError(f"dimension {dim} exceeds configured maximum {TOL.max_dim}")
        dims = self.dims
        parties = self.parties
        if dims is None:
            if parties is not None and len(parties) == 0:
                dims = ()
            else:
                dims = (2,) * _qubit_count(dim)
        dims = tuple(int(d) for d in dims)
        if parties is None:
            parties = tuple(range(1, len(dims) + 1))
        parties = tuple(parties)
        if len(parties) != len(dims):
            raise DimensionError(f"{len(parties)} party labels for {len(dims)} registers")
        if len(set(parties)) != len(parties):
            raise InvariantError(f"duplicate party labels in {parties}")
        if math.prod(dims) != dim:
            raise DimensionError(f"register dims {dims} do not multiply to {dim}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "parties", parties)
        if self.validate:
            check_density_matrix(m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def axes(self, labels: Iterable[Label]) -> list[int]:
        index = {p: i for i, p in enumerate(self.parties)}
        try:
            return [index[p] for p in labels]
        except KeyError as exc:
            raise InvariantError(f"party {exc.args[0]!r} not in {self.parties}") from None

    def with_matrix(self, matrix, validate: bool = True) -> "DensityMatrix":
        return DensityMatrix(matrix, self.parties, self.dims, validate=validate)

    def is_pure(self, tol: float = 1e-10) -> bool:
        vals = np.linalg.eigvalsh(self.matrix)
        return bool(vals[-1] > 1 - tol and np.all(np.abs(vals[:-1]) < tol))


def check_density_matrix(m: np.ndarray) -> None:
    if not is_hermitian(m, TOL.hermitian):
        raise InvariantError("density matrix is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1) > TOL.trace:
        raise InvariantError(f"density matrix has trace {tr}")
    lo = np.linalg.eigvalsh(m)[0]
    if lo < -TOL.psd:
        raise InvariantError(f"density matrix has negative eigenvalue {lo:.3e}")


# ---------------------------------------------------------------------------
# constructors


def pure_state(psi, parties=None, dims=None) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()), parties, dims)


def basis_state(bits: Sequence[int], parties=None) -> DensityMatrix:
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int("".join(str(b) for b in bits), 2) if bits else 0] = 1
    return pure_state(psi, parties)


def ghz_ket(n: int, phase: complex = 1.0) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1 / math.sqrt(2)
    psi[-1] = phase / math.sqrt(2)
    return psi


def ghz_state(n: int, parties=None) -> DensityMatrix:
    return pure_state(ghz_ket(n), parties)


def plus_state(n: int, parties=None) -> DensityMatrix:
    return pure_state(np.full(2**n, 2 ** (-n / 2), dtype=complex), parties)


def maximally_mixed(n: int, parties=None) -> DensityMatrix:
    return DensityMatrix(np.eye(2**n) / 2**n, parties)


def depolarized(rho: DensityMatrix, p: float) -> DensityMatrix:
    """Global depolarizing admixture ``(1-p) rho + p I/d``."""
    if not 0 <= p <= 1:
        raise InvariantError(f"depolarizing probability {p} outside [0, 1]")
    return rho.with_matrix((1 - p) * rho.matrix + p * np.eye(rho.dim) / rho.dim)


def random_pure_state(dim: int, rng: np.random.Generator, parties=None, dims=None) -> DensityMatrix:
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return pure_state(psi, parties, dims)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None,
                          parties=None, dims=None) -> DensityMatrix:
    """Ginibre-ensemble state, full rank unless ``rank`` is given."""
    g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, parties, dims)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# ---------------------------------------------------------------------------
# channels and measurements


@dataclass(frozen=True, eq=False)
class Channel:
    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(as_matrix(k) for k in self.kraus_ops)
        if not ops:
            raise InvariantError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops) or shape[0] != shape[1]:
            raise DimensionError("Kraus operators must be square and share one shape")
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(shape[0]))) > TOL.completeness:
            raise InvariantError("Kraus operators violate completeness (sum K^dag K != I)")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]


def unitary_channel(u) -> Channel:
    return Channel((u,))


def depolarizing_channel(p: float, dim: int = 2) -> Channel:
    """``rho -> (1-p) rho + p Tr(rho) I/d`` written with the Weyl basis."""
    if not 0 <= p <= 1:
        raise InvariantError(f"depolarizing probability {p} outside [0, 1]")
    omega = np.exp(2j * np.pi / dim)
    shift = np.roll(np.eye(dim), 1, axis=0)
    clock = np.diag(omega ** np.arange(dim))
    ops = []
    for a in range(dim):
        for b in range(dim):
            w = 1 - p + p / dim**2 if a == b == 0 else p / dim**2
            ops.append(math.sqrt(w) * np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
    return Channel(tuple(ops))


def random_channel(dim: int, rng: np.random.Generator, n_kraus: int = 3) -> Channel:
    """Random CPTP map from a Haar isometry."""
    u = random_unitary(dim * n_kraus, rng)
    iso = u[:, :dim]
    return Channel(tuple(iso[k * dim:(k + 1) * dim, :] for k in range(n_kraus)))


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Projectors keyed by outcome label, acting on the listed registers jointly."""

    projectors: Mapping

    def __post_init__(self):
        projs = {k: as_matrix(v) for k, v in dict(self.projectors).items()}
        if not projs:
            raise InvariantError("measurement has no outcomes")
        dim = next(iter(projs.values())).shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for label, p in projs.items():
            if p.shape != (dim, dim):
                raise DimensionError("projectors must share one square shape")
            if not is_hermitian(p, TOL.projector) or np.max(np.abs(p @ p - p)) > TOL.projector:
                raise InvariantError(f"outcome {label!r} is not an orthogonal projector")
            total += p
        if np.max(np.abs(total - np.eye(dim))) > TOL.projector:
            raise InvariantError("projectors do not sum to identity")
        object.__setattr__(self, "projectors", projs)

    @property
    def dim(self) -> int:
        return next(iter(self.projectors.values())).shape[0]


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def basis_measurement(u: np.ndarray, labels=None) -> ProjectiveMeasurement:
    """Measurement in the orthonormal basis given by the columns of ``u``."""
    u = as_matrix(u)
    labels = labels if labels is not None else range(u.shape[1])
    return ProjectiveMeasurement({lab: np.outer(u[:, i], u[:, i].conj()) for i, lab in enumerate(labels)})


def computational_basis() -> ProjectiveMeasurement:
    return basis_measurement(np.eye(2))


def x_basis() -> ProjectiveMeasurement:
    """Outcome 0 is |+>, outcome 1 is |->."""
    return basis_measurement(HADAMARD)


class MeasurementBranch(NamedTuple):
    outcome: object
    probability: float
    post_state: DensityMatrix | None
    possible: bool


# ---------------------------------------------------------------------------
# tensor plumbing


def apply_left(mat: np.ndarray, op: np.ndarray, axes: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Return ``(op on registers axes) @ mat`` without forming the full operator."""
    dims = tuple(dims)
    D = mat.shape[0]
    t = mat.reshape(dims + (mat.shape[1],))
    front = list(range(len(axes)))
    t = np.moveaxis(t, list(axes), front)
    shape = t.shape
    t = (op @ t.reshape(op.shape[1], -1)).reshape(shape)
    return np.moveaxis(t, front, list(axes)).reshape(D, mat.shape[1])


def conjugate(mat: np.ndarray, op: np.ndarray, axes: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """``K mat K^dag`` with ``K`` acting on ``axes``."""
    x = apply_left(mat, op, axes, dims)
    return apply_left(x.conj().T, op, axes, dims).conj().T


def embed_operator(op: np.ndarray, axes: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    return apply_left(np.eye(math.prod(dims), dtype=complex), as_matrix(op), axes, dims)


def tensor_product(a, b):
    """Kronecker product; for states the party order is ``a`` then ``b``."""
    if isinstance(a, DensityMatrix) != isinstance(b, DensityMatrix):
        raise InvariantError("tensor_product needs two states or two matrices")
    if isinstance(a, DensityMatrix):
        if a.dim * b.dim > TOL.max_dim:
            raise DimensionError(f"product dimension {a.dim * b.dim} exceeds {TOL.max_dim}")
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.parties + b.parties, a.dims + b.dims)
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[0] * b.shape[0] > TOL.max_dim or a.shape[1] * b.shape[1] > TOL.max_dim:
        raise DimensionError(f"product dimension exceeds {TOL.max_dim}")
    return np.kron(a, b)


def partial_trace_matrix(m: np.ndarray, dims: Sequence[int], keep_axes: Sequence[int]) -> np.ndarray:
    dims = tuple(dims)
    k = len(dims)
    drop = [i for i in range(k) if i not in keep_axes]
    dk = math.prod(dims[i] for i in keep_axes)
    dd = math.prod(dims[i] for i in drop)
    t = m.reshape(dims + dims)
    order = list(keep_axes) + drop
    t = t.transpose(order + [i + k for i in order]).reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on ``keep``, registers kept in their original relative order."""
    keep = set(keep)
    if not keep:
        raise InvariantError("partial trace over every register leaves a scalar, not a state")
    missing = keep - set(rho.parties)
    if missing:
        raise InvariantError(f"parties {sorted(missing, key=str)} not in {rho.parties}")
    axes = [i for i, p in enumerate(rho.parties) if p in keep]
    m = partial_trace_matrix(rho.matrix, rho.dims, axes)
    return DensityMatrix(m, tuple(rho.parties[i] for i in axes), tuple(rho.dims[i] for i in axes))


def apply_channel(rho: DensityMatrix, ch: Channel, target) -> DensityMatrix:
    (ax,) = rho.axes([target])
    if rho.dims[ax] != ch.dim:
        raise DimensionError(f"channel of dim {ch.dim} on register of dim {rho.dims[ax]}")
    out = sum(conjugate(rho.matrix, k, [ax], rho.dims) for k in ch.kraus_ops)
    return rho.with_matrix(out)


def projective_measure(rho: DensityMatrix, meas: ProjectiveMeasurement, parties) -> list[MeasurementBranch]:
    parties = list(parties)
    axes = rho.axes(parties)
    if math.prod(rho.dims[a] for a in axes) != meas.dim:
        raise DimensionError("projector dimension does not match the measured registers")
    branches = []
    for label, proj in meas.projectors.items():
        post = conjugate(rho.matrix, proj, axes, rho.dims)
        p = float(np.trace(post).real)
        if p > TOL.rank_cutoff:
            branches.append(MeasurementBranch(label, p, rho.with_matrix(post / p, validate=False), True))
        else:
            branches.append(MeasurementBranch(label, max(p, 0.0), None, False))
    return branches


# ---------------------------------------------------------------------------
# spectra, norms and distances


class EigenResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def hermitian_eigen(m) -> EigenResult:
    m = as_matrix(m)
    if not is_hermitian(m, TOL.hermitian):
        raise InvariantError("hermitian_eigen called on a non-Hermitian matrix")
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    return EigenResult(vals, vecs)


def trace_norm(m) -> float:
    m = as_matrix(m)
    if is_hermitian(m, 1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    if is_hermitian(1j * m, 1e-12):
        h = 1j * m
        return float(np.sum(np.abs(np.linalg.eigvalsh((h + h.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    if vals[0] < -TOL.psd_metric:
        raise InvariantError(f"state has negative eigenvalue {vals[0]:.3e}")
    root = np.where(vals > TOL.rank_cutoff, np.sqrt(np.clip(vals, 0, None)), 0.0)
    return (vecs * root) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """Squared (Uhlmann) fidelity, computed as ``(sum of singular values of sqrt(rho) sqrt(sigma))^2``."""
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"fidelity of states with shapes {a.shape} and {b.shape}")
    s = np.linalg.svd(_psd_sqrt(a) @ _psd_sqrt(b), compute_uv=False).sum()
    return float(min(max(s * s, 0.0), 1.0))


def trace_distance(rho, sigma) -> float:
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"trace distance of states with shapes {a.shape} and {b.shape}")
    for m in (a, b):
        if np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -TOL.psd_metric:
            raise InvariantError("state is not positive semidefinite")
    return 0.5 * trace_norm(a - b)


def bures_distance_from_fidelity(f: float) -> float:
    return math.sqrt(max(2 * (1 - math.sqrt(f)), 0.0))


class StateMetrics(NamedTuple):
    F: float
    T: float
    D_B: float


def state_metrics(rho, sigma) -> StateMetrics:
    f = fidelity(rho, sigma)
    return StateMetrics(f, trace_distance(rho, sigma), bures_distance_from_fidelity(f))


def helstrom_advantage(rho, sigma) -> float:
    """Optimal single-shot distinguishing advantage at uniform prior."""
    return trace_distance(rho, sigma)


def sld_solve(rho, drho) -> np.ndarray:
    """Symmetric logarithmic derivative ``L`` with ``drho = (rho L + L rho)/2``.

    Solved in the eigenbasis of ``rho``; pairs with ``lambda_i + lambda_j``
    below the rank cutoff are set to zero, and a derivative with weight in
    the kernel-kernel block means the rank changes, which has no SLD.
    """
    r = as_matrix(rho)
    d = as_matrix(drho)
    if d.shape != r.shape:
        raise DimensionError("rho and its derivative differ in shape")
    if not is_hermitian(d, TOL.sld_kernel):
        raise InvariantError("state derivative is not Hermitian")
    if abs(np.trace(d)) > TOL.sld_kernel:
        raise InvariantError("state derivative is not traceless")
    vals, vecs = np.linalg.eigh((r + r.conj().T) / 2)
    vals = np.clip(vals, 0, None)
    dt = vecs.conj().T @ d @ vecs
    denom = vals[:, None] + vals[None, :]
    support = denom >= TOL.rank_cutoff
    if np.any(np.abs(dt[~support]) > TOL.sld_kernel):
        raise RankChangeError("state derivative has a kernel-kernel component; the rank changes here")
    lt = np.zeros_like(dt)
    lt[support] = 2 * dt[support] / denom[support]
    L = vecs @ lt @ vecs.conj().T
    return (L + L.conj().T) / 2


# ---------------------------------------------------------------------------
# text matrix format: "dim=<d>" then "<row> <col> <re> <im>" lines


def dumps_matrix(m) -> str:
    m = as_matrix(m)
    lines = [f"dim={m.shape[0]}"]
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            z = m[i, j]
            lines.append(f"{i} {j} {float(z.real)!r} {float(z.imag)!r}")
    return "\n".join(lines) + "\n"


def loads_matrix(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("dim="):
        raise InvariantError("matrix file must start with 'dim=<d>'")
    try:
        d = int(lines[0][4:])
    except ValueError:
        raise InvariantError(f"bad dimension line {lines[0]!r}") from None
    if d < 1 or d > TOL.max_dim:
        raise DimensionError(f"dimension {d} outside [1, {TOL.max_dim}]")
    m = np.zeros((d, d), dtype=complex)
    for n, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 4:
            raise InvariantError(f"line {n}: expected '<row> <col> <re> <im>'")
        try:
            i, j = int(parts[0]), int(parts[1])
            m[i, j] = complex(float(parts[2]), float(parts[3]))
        except (ValueError, IndexError):
            raise InvariantError(f"line {n}: cannot parse {ln!r}") from None
        if not (0 <= i < d and 0 <= j < d):
            raise InvariantError(f"line {n}: index out of range")
    return m


def save_matrix(path, m) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_matrix(m))


def load_density_matrix(path, parties=None, dims=None) -> DensityMatrix:
    with open(path, encoding="utf-8") as fh:
        return DensityMatrix(loads_matrix(fh.read()), parties, dims)
