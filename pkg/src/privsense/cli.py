"""Command-line front end: config parsing, scenario dispatch, result files.

Usage::

    privsense privacy --config run.ini --out results/
    privsense simulate --config run.ini --seed 7

Exit codes: 0 success, 2 configuration error, 3 invariant violation,
4 search or branch budget exhausted.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import acproto as ap
from . import harness as hs
from . import metrology as mt
from . import qcore as qc
from . import veriflib as vl
from .errors import BranchOverflowError, ConfigError, PrivsenseError

KINDS = ("qfim", "privacy", "simulate", "advantage", "audit", "compose")
STOCHASTIC = {"simulate", "advantage"}
OUT_ENV = "PRIVSENSE_OUT"
DEFAULT_OUT = "privsense_out"

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_BUDGET = 0, 2, 3, 4

SCHEMA = {
    "scenario": {"kind", "n", "rounds", "trials", "seed", "theta", "strict"},
    "state": {"spec", "p", "path"},
    "encoding": {"builtin", "path", "a", "basis"},
    "partition": {"dishonest"},
    "compose": {"epsilon", "lambda", "delta", "epsilon2"},
    "audit": {"directions", "grid", "max_evaluations"},
    "simulate": {"points"},
    "output": {"dir"},
}
STATE_SPECS = ("ghz", "plus-product", "depolarized-ghz", "file")


class BudgetExhausted(PrivsenseError):
    """A scenario finished but its search or enumeration budget ran out."""


@dataclass(frozen=True)
class RunConfig:
    kind: str
    n: int = 3
    rounds: int = 1
    trials: int = 100_000
    seed: int | None = None
    theta: tuple = ()
    state: str = "ghz"
    p: float = 0.0
    state_path: str | None = None
    encoding: str = "mean"
    encoding_path: str | None = None
    a: tuple = ()
    basis: str | None = None
    dishonest: tuple = ()
    epsilon: float = 0.0
    lam: float = 0.0
    delta: float = 0.0
    epsilon2: float | None = None
    directions: int = 32
    grid: int = 64
    max_evaluations: int = 200_000
    points: int = 8
    out: str | None = None
    strict: bool = True

    def digest(self) -> str:
        """Hash of everything that determines the results (the output directory excluded)."""
        d = asdict(self)
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    kind: str
    started: str
    finished: str = ""
    versions: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    status: str = "ok"
    errors: list = field(default_factory=list)
    exit_code: int = EXIT_OK
    plot_rows: list = field(default_factory=list, repr=False)
    table: list = field(default_factory=list, repr=False)
    out_dir: str | None = None

    def record(self) -> dict:
        d = asdict(self)
        d.pop("plot_rows")
        d.pop("table")
        return d


# ---------------------------------------------------------------------------
# configuration


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.replace(",", " ").split())


def parse_config(path, strict: bool | None = None, overrides: dict | None = None) -> RunConfig:
    """Read and validate an INI run configuration; every problem is reported at once."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {path} not found"])
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError([f"config syntax: {exc}"]) from None
    errors: list[str] = []
    get = lambda sec, key: parser.get(sec, key, fallback=None)  # noqa: E731
    strict_cfg = get("scenario", "strict")
    strict_mode = True if strict_cfg is None else strict_cfg.strip().lower() in ("1", "true", "yes", "on")
    if strict:
        strict_mode = True
    if strict_mode:
        for sec in parser.sections():
            if sec not in SCHEMA:
                errors.append(f"unknown section [{sec}]")
                continue
            for key in parser[sec]:
                if key not in SCHEMA[sec]:
                    errors.append(f"unknown key {sec}.{key}")

    values: dict = {}

    def conv(sec, key, fn, name=None):
        raw = get(sec, key)
        if raw is None:
            return
        try:
            values[name or key] = fn(raw.strip())
        except ValueError:
            errors.append(f"{sec}.{key}: cannot parse {raw!r}")

    conv("scenario", "kind", str)
    conv("scenario", "n", int)
    conv("scenario", "rounds", int)
    conv("scenario", "trials", int)
    conv("scenario", "seed", int)
    conv("scenario", "theta", _floats)
    conv("state", "spec", str, "state")
    conv("state", "p", float)
    conv("state", "path", str, "state_path")
    conv("encoding", "builtin", str, "encoding")
    conv("encoding", "path", str, "encoding_path")
    conv("encoding", "a", _floats)
    conv("encoding", "basis", str)
    conv("partition", "dishonest", _ints)
    conv("compose", "epsilon", float)
    conv("compose", "lambda", float, "lam")
    conv("compose", "delta", float)
    conv("compose", "epsilon2", float)
    conv("audit", "directions", int)
    conv("audit", "grid", int)
    conv("audit", "max_evaluations", int)
    conv("simulate", "points", int)
    conv("output", "dir", str, "out")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values["strict"] = strict_mode
    if "kind" not in values:
        errors.append("scenario.kind is required")
        raise ConfigError(errors)
    base = path.parent
    for key in ("state_path", "encoding_path"):
        if values.get(key):
            p = Path(values[key])
            values[key] = str(p if p.is_absolute() else base / p)
    cfg = RunConfig(**values)
    errors.extend(validate_config(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def validate_config(cfg: RunConfig) -> list[str]:
    errors = []
    if cfg.kind not in KINDS:
        errors.append(f"scenario.kind: {cfg.kind!r} is not one of {', '.join(KINDS)}")
    if cfg.kind != "compose" and not 2 <= cfg.n <= 4:
        errors.append(f"scenario.n: {cfg.n} outside the supported range 2..4")
    if cfg.rounds < 1:
        errors.append("scenario.rounds: must be at least 1")
    if cfg.trials < 100:
        errors.append("scenario.trials: must be at least 100")
    if cfg.kind in STOCHASTIC and cfg.seed is None:
        errors.append(f"scenario.seed: required for the stochastic scenario {cfg.kind!r}")
    if cfg.seed is not None and not 0 <= cfg.seed < 2**64:
        errors.append("scenario.seed: must be an unsigned 64-bit integer")
    if cfg.theta and len(cfg.theta) != cfg.n:
        errors.append(f"scenario.theta: has {len(cfg.theta)} entries, expected n={cfg.n}")
    if cfg.state not in STATE_SPECS:
        errors.append(f"state.spec: {cfg.state!r} is not one of {', '.join(STATE_SPECS)}")
    if not 0 <= cfg.p <= 1:
        errors.append(f"state.p: {cfg.p} outside [0, 1]")
    if cfg.state == "file":
        if not cfg.state_path:
            errors.append("state.path: required when state.spec = file")
        elif not Path(cfg.state_path).is_file():
            errors.append(f"state.path: {cfg.state_path} does not exist")
        else:
            try:
                rho = qc.load_density_matrix(cfg.state_path)
                if rho.dim != 2**cfg.n:
                    errors.append(f"state.path: state has dimension {rho.dim}, expected {2**cfg.n}")
            except PrivsenseError as exc:
                errors.append(f"state.path: {exc}")
            except ValueError as exc:
                errors.append(f"state.path: unreadable matrix file ({exc})")
    if cfg.encoding not in ("mean", "phase", "file"):
        errors.append(f"encoding.builtin: {cfg.encoding!r} is not one of mean, phase, file")
    if cfg.encoding == "file" and not (cfg.encoding_path and Path(cfg.encoding_path).is_file()):
        errors.append("encoding.path: an existing encoding file is required when encoding.builtin = file")
    if cfg.a:
        if len(cfg.a) != cfg.n:
            errors.append(f"encoding.a: has {len(cfg.a)} entries, expected n={cfg.n}")
        elif cfg.encoding == "mean":
            errors.append("encoding.a: the mean encoding fixes a; drop the key or use builtin = phase")
        elif any(x == 0 for x in cfg.a):
            errors.append("encoding.a: every entry must be non-zero")
    if cfg.basis is not None and cfg.basis not in mt.BASES:
        errors.append(f"encoding.basis: {cfg.basis!r} is not one of {', '.join(mt.BASES)}")
    if any(not 1 <= d <= cfg.n for d in cfg.dishonest):
        errors.append(f"partition.dishonest: parties must lie in 1..{cfg.n}")
    if len(set(cfg.dishonest)) != len(cfg.dishonest) or (cfg.dishonest and len(cfg.dishonest) >= cfg.n):
        errors.append("partition.dishonest: must list distinct parties and leave at least one honest")
    for name, v in (("compose.epsilon", cfg.epsilon), ("compose.lambda", cfg.lam), ("compose.delta", cfg.delta),
                    ("compose.epsilon2", cfg.epsilon2)):
        if v is not None and not 0 <= v <= 1:
            errors.append(f"{name}: {v} outside [0, 1]")
    if cfg.directions < 1 or cfg.grid < 3 or cfg.max_evaluations < 1:
        errors.append("audit: directions >= 1, grid >= 3 and max_evaluations >= 1 are required")
    if cfg.points < 1:
        errors.append("simulate.points: must be at least 1")
    return errors


def load_encoding_file(path, n: int) -> mt.EncodingFamily:
    """Encoding file: ``[encoding]`` with ``a``, optional ``basis`` and ``generator`` (matrix file)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(path)
    sec = parser["encoding"]
    a = np.array(_floats(sec["a"]))
    a = a / np.linalg.norm(a)
    base = Path(path).parent
    gens = []
    for mu in range(1, n + 1):
        name = sec.get(f"generator{mu}", sec.get("generator"))
        gens.append(qc.loads_matrix((base / name).read_text()) if name else mt.PROJECTOR_ONE)
    return mt.EncodingFamily(n=n, a=a, generators=tuple(gens), basis=sec.get("basis", "z"))


def build_inputs(cfg: RunConfig):
    if cfg.state == "ghz":
        rho = qc.ghz_state(cfg.n)
    elif cfg.state == "plus-product":
        rho = qc.plus_state(cfg.n)
    elif cfg.state == "depolarized-ghz":
        rho = qc.depolarized(qc.ghz_state(cfg.n), cfg.p)
    else:
        rho = qc.load_density_matrix(cfg.state_path)
    if cfg.encoding == "mean":
        enc = mt.mean_encoding(cfg.n)
    elif cfg.encoding == "phase":
        enc = mt.phase_encoding(cfg.n, a=np.array(cfg.a) / np.linalg.norm(cfg.a) if cfg.a else None,
                                basis=cfg.basis or "x")
    else:
        enc = load_encoding_file(cfg.encoding_path, cfg.n)
    if cfg.basis and cfg.encoding == "mean" and cfg.basis != "x":
        enc = replace(enc, basis=cfg.basis)
    return rho, enc


def partition_of(cfg: RunConfig) -> ap.PartyPartition:
    d = frozenset(cfg.dishonest or (cfg.n,))
    return ap.PartyPartition(cfg.n, frozenset(range(1, cfg.n + 1)) - d, d)


# ---------------------------------------------------------------------------
# scenarios


def _theta(cfg: RunConfig) -> np.ndarray:
    return np.array(cfg.theta, dtype=float) if cfg.theta else np.zeros(cfg.n)


def scenario_qfim(cfg, rho, enc):
    q = mt.qfim(rho, enc, _theta(cfg), allow_finite_difference=not enc.is_unitary)
    header = ["mu", "nu", "qfim"]
    rows = [[mu + 1, nu + 1, q[mu, nu]] for mu in range(cfg.n) for nu in range(cfg.n)]
    plot = [(mu + 1, q[mu, mu], "qfim_diagonal") for mu in range(cfg.n)]
    return header, rows, plot, {"trace_q": float(np.trace(q)), "P": mt.privacy_measure(q, enc.unit_a)}


def scenario_privacy(cfg, rho, enc):
    r = mt.privacy_report(rho, enc, _theta(cfg), allow_finite_difference=not enc.is_unitary)
    summary = {
        "P": r.P,
        "eps_bugalho": r.eps_bugalho,
        "eps_hassani_pairwise_max": float(np.max(r.eps_hassani_pairwise)),
        "k_star": r.k_star,
        "eps_star": r.eps_star,
        "alignment_bound_stated": r.alignment_bound,
        "alignment_bound_chain": r.alignment_bound_chain,
        "trace_q": r.trace_q,
    }
    if r.eps_hassani_commutator is not None:
        summary["eps_hassani_commutator_max"] = float(np.max(r.eps_hassani_commutator))
    header = list(summary)
    plot = [(i, v, k) for i, (k, v) in enumerate(summary.items()) if v is not None]
    return header, [[summary[k] for k in header]], plot, summary


def scenario_simulate(cfg, rho, enc):
    """Honest runs over the sweep ``n * mean = k pi / (points - 1)``; parity statistics per point."""
    mean_ghz = enc.mean_mode and cfg.state == "ghz"
    spec = ap.SystemSpec.all_honest(cfg.n, general=not mean_ghz)
    system = ap.build_system(spec, enc, None if mean_ghz else rho, rounds=cfg.rounds, seed=cfg.seed)
    header = ["theta_bar", "empirical_even_frequency", "predicted_even_frequency"]
    rows, plot = [], []
    span = max(cfg.points - 1, 1)
    for k in range(cfg.points):
        theta_bar = k * math.pi / (span * cfg.n)
        theta = np.full(cfg.n, theta_bar)
        seed = int(np.random.SeedSequence([cfg.seed, k]).generate_state(1, np.uint64)[0])
        t = system.execute({mu: theta_bar for mu in range(1, cfg.n + 1)}, seed=seed)
        if t.aborted:
            raise PrivsenseError(f"run aborted: {t.aborted}")
        bits = np.array(t.final_bits(1))
        empirical = float(1 - bits.mean())
        if mean_ghz:
            predicted = 0.5 * (1 + math.cos(cfg.n * theta_bar))
        else:
            predicted = mt.combined_bit_probability(rho, enc, theta)
        rows.append([theta_bar, empirical, predicted])
        plot += [(theta_bar, empirical, "empirical"), (theta_bar, predicted, "predicted")]
    sd = [math.sqrt(max(p * (1 - p), 1e-300) / cfg.rounds) for _, _, p in rows]
    worst = max(abs(e - p) / s if s > 1e-150 else (0.0 if e == p else math.inf) for (_, e, p), s in zip(rows, sd))
    return header, rows, plot, {"points": cfg.points, "rounds": cfg.rounds, "max_sigma_deviation": worst}


class _ParityCheck(ap.Strategy):
    """Dishonest parties measure honestly; honest angles fixed by the config."""

    def __init__(self, angles, basis):
        self.angles, self.basis, self.bits = angles, basis, {}

    def observe(self, party, message, view):
        if message.payload_type == ap.QUBIT:
            self.bits[party] = view.measure(message.payload, self.basis)

    def respond(self, request, view):
        if request.payload_type == ap.ANGLE:
            return self.angles[request.party]
        return self.bits.get(request.party, 0)


def scenario_advantage(cfg, rho, enc):
    part = partition_of(cfg)
    general = not (enc.mean_mode and cfg.state == "ghz")
    rho_arg = rho if general else None

    def pair(rounds):
        return (ap.build_system(ap.SystemSpec.real(part, general), enc, rho_arg, rounds, cfg.seed),
                ap.build_system(ap.SystemSpec.simulated(part, general), enc, rho_arg, rounds, cfg.seed))

    theta = np.mod(_theta(cfg), 2 * math.pi)
    inputs = {mu: float(theta[mu - 1]) for mu in part.honest} | {mu: 0 for mu in part.dishonest}
    exact = hs.exact_advantage(*pair(1), inputs).d_hat
    honest = min(part.honest)
    dishonest = min(part.dishonest)
    basis = "x" if not general else enc.basis
    g = mt.parity if not general else enc.g

    def decide(t):
        p = t.final_bits(honest)
        o = [m.payload for m in t.messages if m.payload_type == ap.BITS and m.interface.endswith(f":{dishonest}")
             and m.direction == "out"]
        return int(any(p[i] != g(o[i]) for i in range(min(len(p), len(o)))))

    strat = hs.Distinguisher(lambda rng: _ParityCheck({mu: float(theta[mu - 1]) for mu in part.honest}, basis),
                             decide)
    est = hs.estimate_advantage(*pair(cfg.rounds), strat, cfg.trials, cfg.seed)
    header = ["exact_advantage", "d_hat", "ci_low", "ci_high", "trials"]
    row = [exact, est.d_hat, est.ci_low, est.ci_high, est.trials]
    plot = [(0, exact, "exact_advantage"), (0, est.d_hat, "empirical_advantage")]
    return header, [row], plot, dict(zip(header, row))


def scenario_audit(cfg, rho, enc):
    budget = mt.SearchBudget(directions=cfg.directions, grid=cfg.grid, max_evaluations=cfg.max_evaluations)
    a = hs.audit(rho, enc, partition_of(cfg), budget, rounds=cfg.rounds, seed=cfg.seed or 0)
    fields = ["measured", "exact_advantage", "multi_round_bound", "privacy_bound", "alignment_bound_stated",
              "alignment_bound_chain", "P", "k_star", "eps_star", "trace_q"]
    rel = sorted(a.relations)
    header = fields + rel + ["search_exhausted"]
    row = [getattr(a, f) for f in fields] + [a.relations[r] for r in rel] + [str(a.search_exhausted).lower()]
    plot = [(getattr(a, f), a.measured, f) for f in ("multi_round_bound", "privacy_bound", "alignment_bound_stated",
                                                      "alignment_bound_chain") if getattr(a, f) is not None]
    summary = dict(zip(header, row))
    if a.search_exhausted:
        summary["budget_exhausted"] = True
    return header, [row], plot, summary


def scenario_compose(cfg, rho, enc):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", vl.ClampWarning)
        v = vl.verified_epsilon(cfg.epsilon, vl.VerificationGuarantee(cfg.lam, cfg.delta))
        s = vl.sequential_epsilon(v, cfg.epsilon2) if cfg.epsilon2 is not None else None
    summary = {"verified_epsilon": v.epsilon, "conditional_epsilon": v.conditional, "clamped": v.clamped}
    if s is not None:
        summary |= {"sequential_epsilon": s.epsilon, "sequential_clamped": s.clamped}
    summary["warnings"] = len(caught)
    header = ["epsilon", "lambda", "delta", "conditional_epsilon", "verified_epsilon"]
    row = [cfg.epsilon, cfg.lam, cfg.delta, v.conditional, v.epsilon]
    if s is not None:
        header += ["epsilon2", "sequential_epsilon"]
        row += [cfg.epsilon2, s.epsilon]
    plot = [(cfg.lam, v.epsilon, "verified_epsilon")]
    return header, [row], plot, summary


SCENARIOS = {
    "qfim": scenario_qfim,
    "privacy": scenario_privacy,
    "simulate": scenario_simulate,
    "advantage": scenario_advantage,
    "audit": scenario_audit,
    "compose": scenario_compose,
}


# ---------------------------------------------------------------------------
# output


def fmt(value) -> str:
    """CSV cell: 17 significant digits for floats, plain text otherwise, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise PrivsenseError(f"refusing to write non-finite value {value}")
        return format(float(value), ".17g")
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_scenario(cfg: RunConfig, out_dir=None) -> RunManifest:
    """Run one scenario and write its results CSV; the manifest records errors instead of raising."""
    out = Path(out_dir or cfg.out or os.environ.get(OUT_ENV, DEFAULT_OUT))
    manifest = RunManifest(cfg.digest(), cfg.kind, _now(), out_dir=str(out),
                           versions={"privsense": __version__, "numpy": np.__version__})
    try:
        rho, enc = build_inputs(cfg) if cfg.kind != "compose" else (None, None)
        header, rows, plot, summary = SCENARIOS[cfg.kind](cfg, rho, enc)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{cfg.kind}_results.csv"
        path.write_text(csv_text(header, rows))
        manifest.results["results"] = path.name
        manifest.summary = {k: (float(v) if isinstance(v, (np.floating,)) else v) for k, v in summary.items()}
        manifest.plot_rows = plot
        manifest.table = [header] + [[fmt(x) for x in r] for r in rows]
        if summary.get("budget_exhausted"):
            manifest.status, manifest.exit_code = "budget_exhausted", EXIT_BUDGET
    except BranchOverflowError as exc:
        manifest.status, manifest.exit_code = "budget_exhausted", EXIT_BUDGET
        manifest.errors.append(f"{type(exc).__name__}: {exc}")
    except (PrivsenseError, ValueError) as exc:
        manifest.status, manifest.exit_code = "invariant_violation", EXIT_INVARIANT
        manifest.errors.append(f"{type(exc).__name__}: {exc}")
    manifest.finished = _now()
    return manifest


def emit_report(manifest: RunManifest, stream=None) -> list[Path]:
    """Print an aligned table and write the plot-data CSV plus ``manifest.json``."""
    stream = stream or sys.stdout
    out = Path(manifest.out_dir or os.environ.get(OUT_ENV, DEFAULT_OUT))
    out.mkdir(parents=True, exist_ok=True)
    plot_path = out / f"{manifest.kind}_plot.csv"
    plot_path.write_text(csv_text(["x", "y", "series"], manifest.plot_rows))
    manifest.results["plot"] = plot_path.name
    man_path = out / "manifest.json"
    man_path.write_text(json.dumps(manifest.record(), indent=2, sort_keys=True, default=str) + "\n")
    if manifest.table:
        widths = [max(len(str(r[i])) for r in manifest.table) for i in range(len(manifest.table[0]))]
        for r in manifest.table:
            print("  ".join(str(c).rjust(w) for c, w in zip(r, widths)), file=stream)
    for k, v in manifest.summary.items():
        print(f"{k:>28}: {v}", file=stream)
    for e in manifest.errors:
        print(f"error: {e}", file=stream)
    written = [out / manifest.results["results"]] if "results" in manifest.results else []
    return written + [plot_path, man_path]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privsense", description="Private networked sensing simulator and auditor")
    p.add_argument("verb", choices=KINDS, help="scenario to run")
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--seed", type=int, default=None, help="override scenario.seed")
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--trials", type=int, default=None, help="override scenario.trials")
    p.add_argument("--strict", action="store_true", help="reject unknown config keys even if the file opts out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, strict=args.strict or None,
                           overrides={"seed": args.seed, "trials": args.trials, "out": args.out})
        if cfg.kind != args.verb:
            raise ConfigError([f"scenario.kind is {cfg.kind!r} but the command was {args.verb!r}"])
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run_scenario(cfg)
    emit_report(manifest)
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
