import re

import numpy as np
import pytest

from tgasched import diff as D


def numeric_grad(f, arrays, h=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arrays`` (mutated in place)."""
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def analytic_grad(build, arrays):
    """Gradients of ``build(*tensors)`` (a scalar tensor) w.r.t. ``arrays``."""
    leaves = [D.Tensor(a, requires_grad=True) for a in arrays]
    with D.Tape() as tape:
        out = build(*leaves)
    tape.backward(out)
    return [t.grad if t.grad is not None else np.zeros_like(t.value) for t in leaves]


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# ---------------------------------------------------------------- acceptance reporting

_ACCEPTANCE_KEY = pytest.StashKey[dict]()
_SELECTED_KEY = pytest.StashKey[set]()
NUM_CRITERIA = 9


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}
    config.stash[_SELECTED_KEY] = set()


def pytest_collection_finish(session):
    for item in session.items:
        m = re.match(r"test_criterion_(\d+)_", item.name)
        if m and item.module.__name__.endswith("test_acceptance"):
            session.config.stash[_SELECTED_KEY].add(int(m.group(1)))


@pytest.fixture
def report(request):
    """``report(k, ok, summary, details=())`` records one criterion's outcome for the final summary."""
    results = request.config.stash[_ACCEPTANCE_KEY]

    def record(k, ok, summary, details=()):
        results[k] = (bool(ok), summary, list(details))
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {summary}")
        for line in details:
            print(f"    {line}")

    return record


def pytest_terminal_summary(terminalreporter, config):
    selected = config.stash.get(_SELECTED_KEY, set())
    if not selected:
        return
    results = config.stash[_ACCEPTANCE_KEY]
    terminalreporter.section("acceptance criteria")
    for k in range(1, NUM_CRITERIA + 1):
        if k in results:
            ok, summary, details = results[k]
            terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {summary}")
            for line in details:
                terminalreporter.write_line(f"    {line}")
        elif k in selected:
            terminalreporter.write_line(f"criterion {k}: FAIL  (errored before reporting)")
        else:
            terminalreporter.write_line(f"criterion {k}: NOT RUN  (deselected)")
