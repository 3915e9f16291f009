import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcot.assembly import (
    assemble,
    assemble_split,
    attach_parents,
    nearest_rank,
    output_answer,
    refine,
    reward_map,
)
from dcot.errors import NoAnswerError
from dcot.types import CoTSegment, Level


def seg(i, importance=0.5, reward=0.5, level=Level.MICRO, text=None):
    return CoTSegment(
        id=i, tokens=(), text=text or f"s{i}", importance=importance, partial_reward=reward, level=level
    )


def answer(i, text="det = 1"):
    return seg(i, 0.95, 1.0, Level.ANSWER, text)


def test_single_answer_is_macro():
    macro, micro = assemble_split([answer(0)])
    assert [m.id for m in macro] == [0] and micro == []


def test_nearest_rank_cut():
    assert nearest_rank([0.9, 0.6, 0.5, 0.4]) == 0.9
    macro, micro = assemble_split([seg(i, v) for i, v in enumerate((0.9, 0.6, 0.5, 0.4))])
    assert [m.id for m in macro] == [0]
    assert [u.id for u in micro] == [1, 2, 3]
    assert all(u.level is Level.MICRO for u in micro) and macro[0].level is Level.MACRO


def test_empty_split():
    assert assemble_split([]) == ([], [])


def test_micro_parents():
    macro = [seg(1, 0.9)]
    micro = [seg(0, 0.2), seg(2, 0.2)]
    assert attach_parents(macro, micro) == {0: 1, 2: 1}


def test_reward_ranking():
    ranking = reward_map([seg(0, reward=0.2), seg(1, reward=0.7)])
    assert ranking == {1: 1, 0: 2}
    assert reward_map([seg(0, reward=0.4), seg(1, reward=0.4)]) == {0: 1, 1: 2}
    assert reward_map([seg(5)]) == {5: 1}


def test_reward_includes_attached_micro():
    macro = [seg(0, 0.9, reward=0.5), seg(2, 0.9, reward=0.6)]
    micro = [seg(1, 0.1, reward=0.3)]
    assert reward_map(macro, micro) == {0: 1, 2: 2}


def test_refine_single_parent():
    m1 = seg(0, 0.9)
    out = refine([m1], [seg(1), seg(2)], {0: 1})
    assert [s.id for s in out] == [0, 1, 2]


def test_refine_reordered_macros_then_answer():
    m1, m2, u1, ans = seg(0, 0.9, 0.2), seg(2, 0.9, 0.7), seg(1, 0.1), answer(3)
    c_macro = [m1, m2, ans]
    ranking = reward_map([m1, m2])
    out = refine(c_macro, [u1], ranking)
    assert [s.id for s in out] == [2, 0, 1, 3]


def test_refine_without_micro():
    m1, m2, ans = seg(0, 0.9, 0.1), seg(1, 0.9, 0.8), answer(2)
    out = refine([m1, m2, ans], [], reward_map([m1, m2]))
    assert [s.id for s in out] == [1, 0, 2]


def test_answer_text_is_output():
    assert output_answer([seg(0, level=Level.MACRO), answer(1, "det = 1")]).text == "det = 1"


def test_low_confidence_fallback():
    out = output_answer([seg(0, level=Level.MACRO, text="rank is 2"), seg(1, level=Level.MICRO)])
    assert out.text == "rank is 2" and out.low_confidence


def test_empty_chain_is_an_error():
    with pytest.raises(NoAnswerError):
        output_answer([])


def test_render_outline():
    segs = [seg(0, 0.9, 0.8, text="pivots"), seg(1, 0.2, text="note"), seg(2, 0.3, text="check")]
    chain = assemble(segs + [seg(3, 0.4, text="recall"), answer(4, "det = 4")])
    assert chain.render().splitlines() == ["[1] pivots", "    - note", "    - check", "    - recall", "=> det = 4"]


buffers = st.lists(
    st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=9
).map(lambda vals: [seg(i, imp, rew) for i, (imp, rew) in enumerate(vals)])


@given(buffers, st.booleans())
def test_partition_conservation_answer_last(segs, with_answer):
    if with_answer:
        segs = segs + [answer(len(segs))]
    chain = assemble(segs)
    macro_ids = {s.id for s in chain.c_macro}
    micro_ids = {s.id for s in chain.c_micro}
    assert not macro_ids & micro_ids
    assert macro_ids | micro_ids == {s.id for s in segs}
    assert sorted(s.id for s in chain.c_final) == [s.id for s in segs]
    if with_answer:
        assert chain.c_final[-1].is_answer and chain.y_out == "det = 1"


@given(buffers)
def test_refine_idempotent(segs):
    first = assemble(segs).c_final
    again = assemble(list(first)).c_final
    assert [s.id for s in again] == [s.id for s in first]
