import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ALPHA = 0.05


def rel_err(a, b) -> float:
    """Largest relative difference, treating equal infinities as exact."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return np.inf
    same = a == b
    scale = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(invalid="ignore", divide="ignore"):
        err = np.where(same, 0.0, np.abs(a - b) / scale)
    return float(np.nan_to_num(err, nan=np.inf).max()) if err.size else 0.0


def assert_rel_close(a, b, tol=1e-9):
    err = rel_err(a, b)
    assert err <= tol, f"relative error {err:.3g} > {tol:g}\n{np.asarray(a)!r}\n{np.asarray(b)!r}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


evalue = st.one_of(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False, allow_subnormal=False),
    st.sampled_from([0.0, 1.0, 20.0]),
)
evalues = st.lists(evalue, min_size=1, max_size=9)
seeds = st.integers(min_value=0, max_value=2**32 - 1)
