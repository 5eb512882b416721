import math
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))  # for `import oracles`

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


import numpy as np  # noqa: E402
from hypothesis import strategies as st  # noqa: E402

from histlaw.model import Distribution, InitialCondition, Kernel, Scenario, SliceGrid  # noqa: E402


def _basis(n_sites):
    out = []
    for s in range(n_sites):
        occ = [0] * n_sites
        occ[s] = 1
        out.append(Distribution(tuple(occ)))
    return out


@st.composite
def random_kernel_scenarios(draw, max_sites=3, max_slices=3, allow_dead_ends=True):
    """Arbitrary (generally non-unitary) single-particle scenarios.

    Transition tables are drawn as explicit dicts so the kernel is a pure
    lookup; amplitudes are bounded away from overflow but not normalized.
    """
    n = draw(st.integers(min_value=2, max_value=max_sites))
    T = draw(st.integers(min_value=1, max_value=max_slices))
    basis = _basis(n)
    amp = st.complex_numbers(min_magnitude=0.05, max_magnitude=2.0,
                             allow_nan=False, allow_infinity=False)
    tables = []
    for _ in range(T):
        table = {}
        for d in basis:
            min_out = 0 if allow_dead_ends else 1
            n_out = draw(st.integers(min_value=min_out, max_value=n))
            dests = draw(st.permutations(range(n)))[:n_out]
            table[d] = tuple((basis[t], draw(amp)) for t in sorted(dests))
        tables.append(table)

    def transitions(j, d):
        return tables[j].get(d, ())

    n_init = draw(st.integers(min_value=1, max_value=n))
    init_sites = draw(st.permutations(range(n)))[:n_init]
    terms = tuple((basis[s], draw(amp)) for s in sorted(init_sites))
    return Scenario(
        grid=SliceGrid(T),
        kernel=Kernel(transitions, unitary=False, name="random-table"),
        initial=InitialCondition(terms=terms),
        site_count=n,
        name="random-table",
    )


@pytest.fixture(scope="session")
def builder_scenarios():
    """One default instance of every registered builder."""
    from histlaw import scenarios as sc
    return {name: fn() for name, fn in sc.available_scenarios().items()}
