import pytest

from acrlab.massaction import build_field
from acrlab.netparse import parse_network

CANONICAL = "species A, B; A + B -> 2 B @ k1 = 1; B -> A @ k2 = 2;"
CANONICAL_UNIT = "species A, B; A + B -> 2 B @ k1 = 1; B -> A @ k2 = 1;"
MOTIF2 = "species A, B; inflow A @ {ga}; inflow B @ {gb}; A + B -> 2 B @ k1 = 1; B -> A @ k2 = 2;"
MOTIF1 = "species A, B; inflow A @ 0.2; inflow B @ 1; A + B -> 0 @ k1 = 1; B -> A + 2 B @ k2 = 2;"
MOTIF3 = "species A, B; inflow A @ 3; inflow B @ 1; B -> A + B @ k2 = 2; A + B -> B @ k1 = 1;"
MOTIF5 = "species A, B; inflow A @ 1; inflow B @ 1; A + 2 B -> 3 B @ k1 = 1; 2 B -> A + B @ k2 = 2;"
IDHKP = ("species X, E, C1, Y, C2; X + E -> C1 @ k1 = 1; C1 -> X + E @ k2 = 1; C1 -> Y + E @ k3 = 2;"
         " Y + C1 -> C2 @ k4 = 1; C2 -> Y + C1 @ k5 = 1; C2 -> X + C1 @ k6 = 3;")
ENZYME = ("species X, Y, E, C; {flows} X + E -> C @ k1 = 1; C -> X + E @ k2 = 1; C -> Y + E @ k3 = 2;"
          " Y + C -> X + C @ k4 = 1;")


def net(text):
    return parse_network(text)


def field_of(text):
    return build_field(parse_network(text))


@pytest.fixture
def canonical():
    return parse_network(CANONICAL)
