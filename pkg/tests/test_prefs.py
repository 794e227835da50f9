import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import burnside_orbits, naive_count, naive_profiles, perm_count_formula, relabel
from spmatch.prefs import (
    Agent,
    GroupElement,
    Profile,
    ProfileError,
    agents,
    all_profiles,
    apply_group,
    build_orbit_table,
    decode,
    decode_batch,
    deviations,
    encode,
    encode_batch,
    format_profile,
    group_elements,
    index_map,
    misreport,
    parse_profile,
    profile_count,
)


@st.composite
def profiles(draw, n=None, m=None):
    n = n or draw(st.integers(1, 4))
    m = m or draw(st.integers(1, 4))
    students = [draw(st.permutations(range(m))) for _ in range(n)]
    schools = [draw(st.permutations(range(n))) for _ in range(m)]
    return Profile.from_lists(students, schools)


@st.composite
def elements(draw, n, m, swap=None):
    sw = draw(st.booleans()) if swap is None else swap
    return GroupElement(tuple(draw(st.permutations(range(n)))), tuple(draw(st.permutations(range(m)))), sw and n == m)


def test_profile_count_examples():
    assert profile_count(3, 3) == 46_656
    assert profile_count(3, 3) * 9 == 419_904
    assert profile_count(1, 1) == 1
    assert profile_count(2, 2) == naive_count(2, 2) == 16


@pytest.mark.parametrize("n,m", [(1, 2), (2, 3), (3, 2), (1, 4)])
def test_profile_count_matches_enumeration(n, m):
    assert profile_count(n, m) == naive_count(n, m) == perm_count_formula(n, m)


def test_profile_count_overflow_and_domain():
    with pytest.raises(OverflowError):
        profile_count(8, 8)
    with pytest.raises(ProfileError):
        profile_count(0, 3)


def test_identity_profile_is_index_zero_and_last_is_reversed():
    ident = Profile.from_lists([(0, 1, 2)] * 3, [(0, 1, 2)] * 3)
    assert encode(ident) == 0
    last = decode(profile_count(3, 3) - 1, 3, 3)
    assert all(r == (2, 1, 0) for r in last.students + last.schools)


@pytest.mark.parametrize("n,m", [(2, 2), (2, 3), (3, 2)])
def test_encoding_follows_lexicographic_order(n, m):
    for i, (st_, sc) in enumerate(naive_profiles(n, m)):
        p = Profile.from_lists(st_, sc)
        assert encode(p) == i
        assert decode(i, n, m) == p


def test_encoding_bijective_3x3():
    S, C = all_profiles(3, 3)
    idx = encode_batch(S, C)
    assert np.array_equal(idx, np.arange(46_656))
    S2, C2 = decode_batch(np.arange(46_656), 3, 3)
    assert np.array_equal(S, S2) and np.array_equal(C, C2)
    # spot-check the scalar path against the batch path
    for i in (0, 1, 777, 46_655):
        p = decode(i, 3, 3)
        assert encode(p) == i
        assert np.array_equal(np.array(p.students), S[i])


def test_decode_rejects_out_of_range():
    with pytest.raises(ProfileError):
        decode(16, 2, 2)
    with pytest.raises(ProfileError):
        decode(-1, 2, 2)


def test_profile_validation():
    with pytest.raises(ProfileError):
        Profile.from_lists([(0, 0)], [(0,), (0,)])
    with pytest.raises(ProfileError):
        Profile(2, 2, ((0, 1),), ((0, 1), (1, 0)))


def test_text_format_round_trip():
    p = decode(12_345, 3, 3)
    text = format_profile(p)
    assert text.startswith("3 3 | s1:")
    assert parse_profile(text) == p
    assert parse_profile("12345", 3, 3) == p
    labelled = "2 2 | s1:c2,c1 s2:c1,c2 | c1:s1,s2 c2:s2,s1"
    assert parse_profile(labelled) == Profile.from_lists([(1, 0), (0, 1)], [(0, 1), (1, 0)])


@pytest.mark.parametrize("bad", ["3 3 | s1:0,1,2", "2 2 | s1:0,1 s2:0,1 | c1:0,1 c3:0,1", "x y | | ", "12"])
def test_text_format_errors(bad):
    with pytest.raises(ProfileError):
        parse_profile(bad)


def test_agent_labels():
    assert str(Agent("s", 0)) == "s1"
    assert Agent.parse("c3") == Agent("c", 2)
    with pytest.raises(ProfileError):
        Agent.parse("x1")


def test_misreport_examples():
    p = decode(4321, 3, 3)
    a = Agent("s", 1)
    assert misreport(p, a, p.preference(a)) == p
    q = misreport(p, a, (2, 1, 0))
    assert q.students[1] == (2, 1, 0)
    assert q.students[0] == p.students[0] and q.schools == p.schools
    with pytest.raises(ProfileError):
        misreport(p, a, (0, 0, 1))
    with pytest.raises(ProfileError):
        misreport(p, Agent("c", 5), (0, 1, 2))


def test_deviation_counts():
    p2 = decode(5, 2, 2)
    assert all(len(deviations(p2, a)) == 1 for a in agents(2, 2))
    p3 = decode(99, 3, 3)
    assert sum(len(deviations(p3, a)) for a in agents(3, 3)) == 30


def test_apply_group_identity_and_worked_example():
    p = decode(31_337, 3, 3)
    assert apply_group(p, GroupElement.identity(3, 3)) == p
    # students relabelled 1->3, 2->1, 3->2: a school ranking 3>2>1 becomes 2>1>3
    g = GroupElement((2, 0, 1), (0, 1, 2))
    q = Profile.from_lists([(0, 1, 2)] * 3, [(2, 1, 0), (0, 1, 2), (0, 1, 2)])
    assert apply_group(q, g).schools[0] == (1, 0, 2)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_apply_group_matches_naive_relabel_and_inverse(data):
    n = data.draw(st.integers(1, 4))
    m = n if data.draw(st.booleans()) else data.draw(st.integers(1, 4))
    p = data.draw(profiles(n, m))
    g = data.draw(elements(n, m))
    q = apply_group(p, g)
    assert (q.students, q.schools) == relabel(p.students, p.schools, g.pi_s, g.pi_c, g.swap)
    assert apply_group(q, g.inverse()) == p


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_group_axioms(data):
    n = data.draw(st.integers(2, 4))
    p = data.draw(profiles(n, n))
    a, b, c = (data.draw(elements(n, n)) for _ in range(3))
    assert (a * b) * c == a * (b * c)
    assert apply_group(p, a * b) == apply_group(apply_group(p, b), a)
    assert a * a.inverse() == GroupElement.identity(n, n)
    M = np.arange(n * n, dtype=float).reshape(n, n)
    assert np.array_equal((a * b).transport(M), a.transport(b.transport(M)))


def test_swap_requires_balanced_market():
    with pytest.raises(ProfileError):
        GroupElement((0, 1), (0, 1, 2), True)
    with pytest.raises(ProfileError):
        group_elements(2, 3, use_symmetry=True)
    with pytest.raises(ProfileError):
        decode(0, 2, 3).swapped()


def test_index_map_is_the_profile_action():
    for g in group_elements(2, 2, True):
        mp = index_map(g, 2, 2)
        for i in range(16):
            assert mp[i] == encode(apply_group(decode(i, 2, 2), g))


@pytest.mark.parametrize("n,m,sym", [(2, 2, False), (2, 2, True), (2, 3, False)])
def test_orbit_count_matches_burnside(n, m, sym):
    t = build_orbit_table(n, m, sym)
    assert len(t.reps) == burnside_orbits(n, m, sym)
    assert sum(t.orbit_size.values()) == profile_count(n, m)
    order = t.group_order
    assert all(order % size == 0 for size in t.orbit_size.values())


def test_orbit_table_3x3():
    for sym, order in ((False, 36), (True, 72)):
        t = build_orbit_table(3, 3, sym)
        assert t.group_order == order
        assert sum(t.orbit_size.values()) == 46_656
        assert all(order % s == 0 for s in t.orbit_size.values())
        # stabilizer size times orbit size is the group order
        assert all(len(t.stabilizers[int(r)]) * t.orbit_size[int(r)] == order for r in t.reps)
        assert t.rep[0] == 0
        assert np.array_equal(t.rep[t.reps], t.reps)
    assert len(build_orbit_table(3, 3, False).reps) == 1300
    assert len(build_orbit_table(3, 3, True).reps) == 669


@pytest.mark.slow
def test_burnside_3x3_symmetric_orbits():
    # independent count of the 3x3 orbits under relabeling and role swap (slow-ish, 72 x 46,656)
    assert burnside_orbits(3, 3, True) == len(build_orbit_table(3, 3, True).reps)


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 46_655))
def test_orbit_witness_reproduces_profile(i):
    t = build_orbit_table(3, 3, True)
    rep, g = t.rep_of(i)
    assert rep <= i
    assert encode(apply_group(decode(rep, 3, 3), g)) == i
    assert t.rep_of(rep)[0] == rep


def test_trivial_orbit_table():
    from spmatch.prefs import OrbitTable

    t = OrbitTable.trivial(2, 2)
    assert not t.reduced
    assert len(t.reps) == 16 and all(v == 1 for v in t.orbit_size.values())


def test_agents_listing():
    assert [str(a) for a in agents(2, 3)] == ["s1", "s2", "c1", "c2", "c3"]
    assert list(itertools.islice((str(a) for a in agents(1, 1)), 2)) == ["s1", "c1"]
