import time

import numpy as np
import pytest
from hypothesis import settings

from ecgpcg.synthetic import Coupling, SynthConfig, synth_coupled_record

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def linear_record():
    """Noiseless 60 s LinearFilter record at 1000 Hz and its ground truth."""
    return synth_coupled_record(SynthConfig(duration_s=60, fs=1000, rng_seed=7))


@pytest.fixture(scope="session")
def nonlinear_record():
    return synth_coupled_record(SynthConfig(duration_s=60, fs=1000, rng_seed=7,
                                            coupling=Coupling.NONLINEAR_AMPLITUDE))


def interior(x, fs, guard_s=1.0):
    g = int(round(guard_s * fs))
    return x[g:len(x) - g]


# -------------------------------------------------------------- acceptance log

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


class _Criterion:
    def __init__(self, log, number, title, budget_s):
        self.log, self.number, self.title, self.budget_s = log, number, title, budget_s
        self.details = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        over = self.budget_s is not None and elapsed > self.budget_s
        ok = exc_type is None and not over
        budget = f"/{self.budget_s:g} s" if self.budget_s is not None else ""
        extra = "; ".join(self.details)
        if exc_type is not None:
            extra = (extra + "; " if extra else "") + f"{exc_type.__name__}: {exc}".splitlines()[0]
        elif over:
            extra = (extra + "; " if extra else "") + "runtime budget exceeded"
        line = (f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'} "
                f"[{elapsed:7.2f} s{budget}] {self.title}" + (f" ({extra})" if extra else ""))
        self.log.append((self.number, line))
        print(line)
        if exc_type is None and over:
            raise AssertionError(f"criterion {self.number} took {elapsed:.1f} s "
                                 f"(budget {self.budget_s} s)")
        return False


@pytest.fixture
def criterion(request):
    """``with criterion(n, title, budget_s) as c:`` times a block and logs PASS/FAIL."""
    log = request.config.stash[_ACCEPTANCE]
    return lambda number, title, budget_s=None: _Criterion(log, number, title, budget_s)
