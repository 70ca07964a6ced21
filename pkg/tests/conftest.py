from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from retrotab.term import fresh

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PROPERTY = settings(max_examples=1000, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])

VARS = [fresh(n) for n in ("A", "B", "C")]

atoms = st.sampled_from(["a", "b", "[]"])
ints = st.sampled_from([1, 2, 3])
constants = st.one_of(atoms, ints)


def terms(max_leaves: int = 6, with_vars: bool = True):
    leaves = st.one_of(constants, st.sampled_from(VARS)) if with_vars else constants

    def extend(children):
        return st.one_of(
            st.tuples(st.just("f"), children),
            st.tuples(st.just("g"), children, children),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def term_tuples(width: int = 2, with_vars: bool = True, max_leaves: int = 4):
    return st.tuples(*[terms(max_leaves, with_vars) for _ in range(width)])
