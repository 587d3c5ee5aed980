import pytest

from srcartan import symexpr as sx
from srcartan.reduction import SubRiemannianSpec

HEIS = sx.Chart(("x", "y", "z"))


def heis_spec(gram=("1", "0", "0", "1"), eta="dz + x*dy", name="heisenberg"):
    p = lambda s: sx.parse(s, HEIS)
    frame = ((p("1"), p("0"), p("0")), (p("0"), p("1"), p("-x")))
    g = ((p(gram[0]), p(gram[1])), (p(gram[2]), p(gram[3])))
    return SubRiemannianSpec(HEIS, sx.parse_one_form(eta, HEIS), frame=frame, gram=g, name=name)


def coframe_spec(forms, eta="dz + x*dy"):
    return SubRiemannianSpec(HEIS, sx.parse_one_form(eta, HEIS),
                             coframe=tuple(sx.parse_one_form(w, HEIS) for w in forms))


@pytest.fixture
def heisenberg():
    return heis_spec()


@pytest.fixture
def nonflat():
    return heis_spec(("1", "0", "0", "1 + x^2"), name="nonflat")
