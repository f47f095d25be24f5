import pytest

from mpifutures.algebra import Act, Call, Choice, Seq
from mpifutures.algebra.terms import CondElse, Par
from mpifutures.dsl import parse_model, parse_term, pretty
from mpifutures.errors import ModelError, ModelSyntaxError, NonFiniteSort, SortError, UndefinedReference

from conftest import model_text

BUNDLED = ["election", "producer", "producer_mod", "deadlock", "leak"]


def test_recursive_definition():
    m = parse_model("process P = send(0,1,int(0)) . P")
    (d,) = m.defs
    assert d.name == "P"
    assert isinstance(d.body, Seq) and d.body.right == Call("P", ())


def test_arity_mismatch_is_a_sort_error():
    with pytest.raises(SortError) as exc:
        parse_model("process P = send(0,1)")
    assert exc.value.span == (1, 13)


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_round_trip(name):
    m = parse_model(model_text(name))
    assert parse_model(pretty(m)) == m


@pytest.mark.parametrize("name", BUNDLED)
def test_pretty_is_idempotent(name):
    once = pretty(parse_model(model_text(name)))
    assert pretty(parse_model(once)) == once


def test_election_structure(election):
    elect = election.definition("Elect")
    assert [p for p, _ in elect.params] == ["i", "v", "h", "n"]
    assert isinstance(elect.body, CondElse)
    assert elect.body.orelse == parse_term("Choose(i, h, v)", election)


def test_choice_prints_left_nested_without_parens():
    m = parse_model("act a\nact b\nact c\nprocess P = a + b + c")
    assert isinstance(m.defs[0].body, Choice) and isinstance(m.defs[0].body.left, Choice)
    assert "a + b + c" in pretty(m)


def test_right_nested_choice_keeps_parens():
    m = parse_model("act a\nact b\nact c\nprocess P = a + (b + c)")
    assert "a + (b + c)" in pretty(m)


def test_sum_format():
    m = parse_model("process P = sum n: Int . recv(1, 0, n)")
    assert "sum n: Int . recv(1, 0, n)" in pretty(m)


def test_parallel_and_precedence():
    m = parse_model("act a\nact b\nact c\nprocess P = a . b || c + a")
    body = m.defs[0].body
    assert isinstance(body, Choice) and isinstance(body.left, Par)


def test_guard_with_else():
    t = parse_term("(1 < 2) -> tau <> eps")
    assert isinstance(t, CondElse)


def test_user_sorts_and_comm():
    m = parse_model(
        "sort Small = 0..2\nsort Odd = {1, 3}\nact c(Small)\nact d(Small)\ncomm c|d\nallow c|d\n"
        "process P = sum x: Small . c(x)\nprocess Q = sum y: Odd . d(y)"
    )
    env = m.environment(2)
    assert env.sorts == {"Small": (0, 1, 2), "Odd": (1, 3)}
    assert "c|d" in env.allow
    assert parse_model(pretty(m)) == m


def test_message_literals():
    m = parse_model("tag lead(Rank)\ntag ping\nprocess P = send(0, 1, lead<1>) . send(0, 1, ping<>)")
    assert "lead<1>" in pretty(m) and "ping<>" in pretty(m)


def test_primed_names():
    m = parse_model("process P(h: Int) = sum h': Int . send(0, 1, max(h, h'))")
    assert "h'" in pretty(m)


@pytest.mark.parametrize("text,err", [
    ("process P = send(0, 1, x)", UndefinedReference),
    ("process P = Q", UndefinedReference),
    ("process P = send(0, 1, nope<1>)", ModelSyntaxError),
    ("tag t(Int)\nprocess P = send(0, 1, t<true>)", SortError),
    ("process P = (1 + 2) -> tau", SortError),
    ("process P = sum s: Set . tau", NonFiniteSort),
    ("process P = sum s: Colour . tau", UndefinedReference),
    ("process P = nsend(0, 1, 2)", SortError),
    ("process Network = tau", ModelSyntaxError),
    ("process P = send(0, 1, 2) .", ModelSyntaxError),
    ("process P = send(0, 1, 2) $", ModelSyntaxError),
    ("process P = barrier(true)", SortError),
    ("comm x|y", UndefinedReference),
    ("act a(Int)\nact b\ncomm a|b", SortError),
    ("act a\nallow a, zz", UndefinedReference),
    ("process P = tau\nprocess P = eps", ModelError),
    ("process P(x: Colour) = tau", UndefinedReference),
    ("init(v: Int) = 3 -> tau", SortError),
])
def test_diagnostics(text, err):
    with pytest.raises(err) as exc:
        parse_model(text)
    line, col = exc.value.span
    lines = text.split("\n")
    assert 1 <= line <= len(lines)
    assert 1 <= col <= len(lines[line - 1]) + 1


def test_syntax_error_lists_expected():
    with pytest.raises(ModelSyntaxError) as exc:
        parse_model("process P = ")
    assert exc.value.expected


def test_init_clause(election):
    assert [p for p, _ in election.init.params] == ["v"]
    assert election.init.term == parse_term("Elect(i, v, v, 0)", election)


def test_comments_are_ignored():
    assert parse_model("# nothing\nprocess P = tau # trailing\n").defs[0].body.__class__.__name__ == "Tau"


def test_action_declaration_sorts():
    with pytest.raises(SortError):
        parse_model("act a(Bool)\nprocess P = a(3)")
    m = parse_model("act a(Bool)\nprocess P = a(true)")
    assert m.defs[0].body == Act("a", (m.defs[0].body.args[0],))
