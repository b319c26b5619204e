import numpy as np
from hypothesis import strategies as st

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)
nonzero_scale = cplx.filter(lambda z: 1e-3 < abs(z) < 1e3)


def lifts(dim: int):
    """Nonzero lifts with comparable coordinates (no subnormal-scale entries)."""
    return st.lists(cplx, min_size=dim + 1, max_size=dim + 1).map(lambda v: np.array(v, dtype=complex)).filter(
        lambda v: np.max(np.abs(v)) > 1e-2
    )


seeds = st.integers(0, 2**32 - 1)
