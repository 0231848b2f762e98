import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def reference_walk(thetas, forward, n_max, phi1=math.pi / 2, phi2=math.pi / 2):
    """
    Site-by-site walk on dicts of amplitudes, written independently of the
    vectorized kernel: |x,+> and |x,-> are mixed by the 2x2 coin, then |+>
    hops right and |-> left (or the reverse).
    """
    plus = {0: 1 / math.sqrt(2)}
    minus = {0: 1 / math.sqrt(2)}
    for theta, fwd in zip(thetas, forward):
        c, s = math.cos(theta), math.sin(theta)
        a, b = complex(c), complex(math.cos(phi1), math.sin(phi1)) * s
        cc = complex(math.cos(phi2), math.sin(phi2)) * s
        d = -complex(math.cos(phi1 + phi2), math.sin(phi1 + phi2)) * c
        new_plus, new_minus = {}, {}
        for x in set(plus) | set(minus):
            p, m = plus.get(x, 0j), minus.get(x, 0j)
            hp = 1 if fwd else -1
            new_plus[x + hp] = new_plus.get(x + hp, 0j) + a * p + b * m
            new_minus[x - hp] = new_minus.get(x - hp, 0j) + cc * p + d * m
        plus, minus = new_plus, new_minus
    size = 2 * n_max + 1
    P = np.zeros(size, dtype=complex)
    M = np.zeros(size, dtype=complex)
    for x, v in plus.items():
        P[x + n_max] = v
    for x, v in minus.items():
        M[x + n_max] = v
    return P, M


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
