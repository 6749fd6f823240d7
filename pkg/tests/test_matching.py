import itertools

from hypothesis import given, settings, strategies as st

from simatch.matching import IncrementalMatcher, hopcroft_karp


def brute_max(adj, n):
    best = 0
    for perm in itertools.permutations(range(1, n + 1)):
        best = max(best, sum(1 for i, j in enumerate(perm, 1) if j in adj[i]))
    return best


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 6))
    adj = {i: sorted(draw(st.sets(st.integers(1, n), max_size=n))) for i in range(1, n + 1)}
    return n, adj


@given(graphs())
@settings(max_examples=80)
def test_hopcroft_karp_is_maximum(g):
    n, adj = g
    m = hopcroft_karp(adj, range(1, n + 1))
    assert len(set(m.values())) == len(m)
    assert all(v in adj[u] for u, v in m.items())
    assert len(m) == brute_max(adj, n)


def test_allowed_right_restricts():
    adj = {1: [1, 2], 2: [1]}
    assert hopcroft_karp(adj, [1, 2]) == {1: 2, 2: 1}
    assert len(hopcroft_karp(adj, [1, 2], allowed_right={2})) == 1


@given(graphs(), st.data())
@settings(max_examples=80)
def test_incremental_matches_recomputation(g, data):
    n, adj = g
    if len(hopcroft_karp(adj, range(1, n + 1))) != n:
        return
    m = IncrementalMatcher(adj, range(1, n + 1), range(1, n + 1))
    lefts, rights = set(range(1, n + 1)), set(range(1, n + 1))
    for i in data.draw(st.permutations(range(1, n + 1))):
        for j in adj[i]:
            if j not in rights:
                continue
            ref = len(hopcroft_karp(adj, lefts - {i}, rights - {j})) == len(lefts) - 1
            assert m.can_assign(i, j) == ref
        ok = [j for j in adj[i] if j in rights and m.can_assign(i, j)]
        j = data.draw(st.sampled_from(ok))
        m.assign(i, j)
        lefts.discard(i)
        rights.discard(j)
