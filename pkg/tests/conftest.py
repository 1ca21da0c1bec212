import numpy as np
import pytest

from costlyfeat import data, env, kernels, synthetic


def make_dataset(X, y, costs=None, present=None, K=None):
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    return data.Dataset(
        X=X,
        present=np.ones((n, p), bool) if present is None else present,
        y=np.asarray(y),
        costs=np.ones(p) if costs is None else costs,
        feature_names=tuple(f"f{j}" for j in range(p)),
        class_count=K or int(np.max(y)) + 1,
    )


@pytest.fixture
def tiny_ds():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 3))
    y = (X[:, 0] > 0).astype(int)
    y[:2] = [0, 1]
    return make_dataset(X, y, costs=np.array([0.2, 0.4, 0.7]))


@pytest.fixture
def redundant_splits():
    ds = synthetic.redundant_informative(n=300, seed=0)
    tr, va, te = data.split(ds, data.SplitSpec(0.6, 0.2, 0.2, seed=1))
    tr, (va, te), _ = data.normalize(tr, [va, te])
    return tr, va, te


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.load_backend(request.param)


@pytest.fixture
def rc():
    return env.RewardConfig(lam=0.01)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; it is echoed now and in the terminal summary."""

    def record(number, title, passed, detail, elapsed):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number} ({title}): {detail} [{elapsed:.1f}s]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2])):
            terminalreporter.write_line(line)
