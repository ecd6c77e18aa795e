import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_partial_trace(m, dims, keep):
    """Index-by-index contraction, independent of the reshaping code path."""
    import itertools

    n = len(dims)
    drop = [i for i in range(n) if i not in keep]
    keep_ranges = [range(dims[i]) for i in keep]
    drop_ranges = [range(dims[i]) for i in drop]
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1

    def flat(idx):
        v = 0
        for i in range(n):
            v = v * dims[i] + idx[i]
        return v

    out = np.zeros((dk, dk), dtype=complex)
    for a, ka in enumerate(itertools.product(*keep_ranges)):
        for b, kb in enumerate(itertools.product(*keep_ranges)):
            s = 0
            for kd in itertools.product(*drop_ranges):
                ia = [0] * n
                ib = [0] * n
                for pos, v in zip(keep, ka):
                    ia[pos] = v
                for pos, v in zip(keep, kb):
                    ib[pos] = v
                for pos, v in zip(drop, kd):
                    ia[pos] = v
                    ib[pos] = v
                s += m[flat(ia), flat(ib)]
            out[a, b] = s
    return out


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion; returns the verdict."""

    def record(tag, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {tag:<4} {title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
