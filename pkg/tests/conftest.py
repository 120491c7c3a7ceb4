import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from corrsteady.models import ModelSpec
from corrsteady.spin import JumpChannel, SpinSpace, spin_matrices

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_pair_state(rng, d, mix=0.3):
    """Swap-symmetric two-site density matrix that is not a product state."""
    from corrsteady.cumulant import swap_matrix
    r1 = random_density(rng, d)
    R = random_density(rng, d * d)
    P = swap_matrix(d)
    R = 0.5 * (R + P @ R @ P)
    return (1 - mix) * np.kron(r1, r1) + mix * R


@st.composite
def model_specs(draw, max_d=9, graded=None):
    """Random models: spin F with d <= max_d, one collective and one local channel, rates in [0, 1]."""
    twoF = draw(st.integers(1, max_d - 1))
    space = SpinSpace(twoF / 2)
    d = space.d
    S = spin_matrices(space)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    rates = [draw(st.floats(0.05, 1.0)) for _ in range(3)]
    if graded is None:
        graded = draw(st.booleans())
    if graded:
        # ladder-type channels keep the U(1) structure
        cop = S.minus * (1 + 0.3 * rng.normal())
        lop = S.plus
    else:
        cop = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        lop = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        cop /= np.linalg.norm(cop, 2)
        lop /= np.linalg.norm(lop, 2)
    zeeman = np.sort(rng.uniform(0, 1, d)) if not graded else space.m_values * draw(st.floats(0, 1))
    ch = [JumpChannel(cop, rates[0], True, 0.0, "J"),
          JumpChannel(lop, rates[1], False, 0.0, "L"),
          JumpChannel(S.zero, rates[2], False, 0.0, "Z")]
    N = draw(st.sampled_from([2.0, 3.0, 10.0, 1e3]))
    return ModelSpec(space, N, zeeman, ch)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = []


def report(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
