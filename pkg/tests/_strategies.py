"""Hypothesis strategies shared by the unit tests."""

import numpy as np
from hypothesis import strategies as st

from xosketch import Valuation


@st.composite
def bxos(draw, m=None, max_m=6, max_t=5):
    m = draw(st.integers(1, max_m)) if m is None else m
    t = draw(st.integers(1, max_t))
    bits = draw(st.lists(st.lists(st.booleans(), min_size=m, max_size=m), min_size=t, max_size=t))
    return Valuation(np.array(bits, dtype=bool))


@st.composite
def xos(draw, m=None, max_m=5, max_t=4, vmax=3):
    m = draw(st.integers(1, max_m)) if m is None else m
    t = draw(st.integers(1, max_t))
    rows = draw(st.lists(st.lists(st.integers(0, vmax), min_size=m, max_size=m), min_size=t, max_size=t))
    return Valuation(np.array(rows, dtype=np.int64))


@st.composite
def bxos_pair(draw, max_m=6, max_t=5):
    m = draw(st.integers(1, max_m))
    return draw(bxos(m=m, max_t=max_t)), draw(bxos(m=m, max_t=max_t))


@st.composite
def xos_pair(draw, max_m=5, max_t=4):
    m = draw(st.integers(1, max_m))
    return draw(xos(m=m, max_t=max_t)), draw(xos(m=m, max_t=max_t))
