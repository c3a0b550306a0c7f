import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reference as R
from eitcorr.bloch import (
    BEAM_SWAP,
    U_MATRIX,
    DegenerateInputError,
    NegativeTransmissionWarning,
    build_bloch_system,
    conjugation_defect,
    dc_transmission,
    steady_state,
)
from eitcorr.params import ParameterError, SystemParams, reference_params, mhz

G = mhz(6.0)

params_st = st.builds(
    SystemParams,
    gamma=st.just(G),
    gamma_d=st.floats(0.0, 0.3).map(mhz),
    gamma_bar=st.floats(0.0, 1.0).map(mhz),
    rabi1=st.floats(0.05, 1.0).map(lambda r: r * G),
    rabi2=st.floats(0.05, 1.0).map(lambda r: r * G),
    delta1=st.floats(-10, 10).map(mhz),
    delta2=st.floats(-10, 10).map(mhz),
    kappa1=st.floats(0.0, 0.3),
    kappa2=st.floats(0.0, 0.3),
)


# -- parameters ----------------------------------------------------------------


@pytest.mark.parametrize(
    "bad",
    [
        dict(gamma=0.0),
        dict(gamma_d=-1.0),
        dict(rabi1=-0.1),
        dict(kappa2=-1e-3),
        dict(gamma_bar=float("nan")),
        dict(delta1=float("inf")),
        dict(phase_noise_correlation=1.5),
    ],
)
def test_params_reject_invalid(bad):
    with pytest.raises(ParameterError):
        SystemParams(**bad)


def test_params_units_and_derived():
    p = SystemParams.from_mhz(delta1_mhz=0.2, delta_mhz=1.5)
    assert p.gamma == pytest.approx(2 * math.pi * 6)
    assert p.two_photon_detuning == pytest.approx(mhz(1.5))
    assert p.epsilon_sq == pytest.approx(1 / 6)
    # full Rabi frequency convention: I/Isat = 2 (Omega/Gamma)^2
    assert 2 * (p.rabi1 / p.gamma) ** 2 == pytest.approx(0.18)
    q = p.with_power_scale(4.0)
    assert q.rabi1 == pytest.approx(2 * p.rabi1)


# -- matrix --------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(params_st)
def test_matrix_matches_liouvillian_reference(p):
    m, x0 = R.reduced_generator(p)
    sys = build_bloch_system(p)
    assert np.allclose(sys.m, m, atol=1e-12)
    assert np.allclose(sys.x0, x0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(params_st)
def test_conjugation_consistency(p):
    assert conjugation_defect(build_bloch_system(p).m) == 0.0


@settings(max_examples=40, deadline=None)
@given(params_st.filter(lambda p: p.gamma_d > 0))
def test_eigenvalues_stable(p):
    assert np.all(build_bloch_system(p).eigenvalues().real < 0)


def test_uncoupled_coherence_decay():
    sys = build_bloch_system(SystemParams(rabi1=0.0, rabi2=0.0, gamma_d=0.0))
    for a in range(2, 6):
        assert sys.m[a, a].real == pytest.approx(-G / 2)


def test_u_matrix_unitary():
    assert np.allclose(U_MATRIX @ np.linalg.inv(U_MATRIX), np.eye(8), atol=1e-15)
    assert np.allclose(U_MATRIX @ U_MATRIX.conj().T, np.eye(8), atol=1e-15)
    x = np.zeros(8, dtype=complex)
    x[2], x[3] = 0.3 + 0.4j, 0.3 - 0.4j
    y = U_MATRIX @ x
    assert y[2] == pytest.approx(-math.sqrt(2) * 0.4)
    assert y[3] == pytest.approx(math.sqrt(2) * 0.3)


def test_matrix_read_only():
    sys = build_bloch_system(SystemParams())
    with pytest.raises(ValueError):
        sys.m[0, 0] = 1.0


def test_phase_averaging_broadens_optical_coherences():
    p = SystemParams()
    diff = build_bloch_system(p, average_phase_noise=True).m - build_bloch_system(p).m
    assert np.allclose(np.diag(diff)[2:6], -p.gamma_bar)
    assert np.allclose(np.diag(diff)[6:], 0.0)


@pytest.mark.xfail(strict=True, reason="quoted estimate double counts the optical pumping rate; see decisions ledger")
def test_slowest_eigenvalue_estimate():
    p = reference_params(0.2, 0.0)
    ev = build_bloch_system(p).eigenvalues()
    slow = ev[np.argmin(np.abs(ev.real))].real
    est = -(p.gamma_d + (p.rabi1**2 + p.rabi2**2) / p.gamma)
    assert abs(slow - est) <= 0.3 * abs(est)


def test_slowest_eigenvalue_matches_pumping_rate():
    p = reference_params(0.2, 0.0)
    ev = build_bloch_system(p).eigenvalues()
    slow = ev[np.argmin(np.abs(ev.real))].real
    est = -(p.gamma_d + (p.rabi1**2 + p.rabi2**2) / (2 * p.gamma))
    assert abs(slow - est) <= 0.3 * abs(est)


# -- steady state --------------------------------------------------------------


def test_dark_state():
    p = SystemParams(gamma_d=0.0, rabi1=0.3 * G, rabi2=0.3 * G)
    ss = steady_state(build_bloch_system(p))
    assert abs(ss.p1) < 1e-12 and abs(ss.p2) < 1e-12
    assert ss.populations[0] == pytest.approx(0.5, abs=1e-12)
    assert ss.populations[1] == pytest.approx(0.5, abs=1e-12)
    assert ss.rho12 == pytest.approx(-0.5, abs=1e-12)


def test_optical_pumping():
    p = SystemParams(gamma_d=0.0, rabi2=0.0)
    ss = steady_state(build_bloch_system(p))
    assert ss.populations[1] == pytest.approx(1.0, abs=1e-12)
    assert abs(ss.p1) < 1e-12


def test_degenerate_input():
    with pytest.raises(DegenerateInputError):
        steady_state(build_bloch_system(SystemParams(rabi1=0.0, rabi2=0.0)))


def test_steady_state_fixture():
    # frozen from the Liouvillian null-space reference (tests/reference.py)
    ss = steady_state(build_bloch_system(reference_params(0.2, 0.5)))
    assert ss.p1.real == pytest.approx(6.222674061805e-02, rel=1e-10)
    assert ss.p1.imag == pytest.approx(6.705901154475e-02, rel=1e-10)
    assert ss.p2.real == pytest.approx(-3.715503278349e-02, rel=1e-10)
    assert ss.p2.imag == pytest.approx(5.916971606890e-02, rel=1e-10)
    assert ss.populations[0] == pytest.approx(5.550142410268e-01, rel=1e-10)
    assert ss.populations[1] == pytest.approx(4.047503520463e-01, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(params_st)
def test_steady_state_invariants(p):
    sys = build_bloch_system(p)
    ss = steady_state(sys)
    assert ss.residual <= 1e-10 * np.linalg.norm(sys.x0)
    assert np.allclose(ss.x_ss, R.steady_vector(p), atol=1e-9)
    pops = np.array(ss.populations)
    assert np.all(pops >= -1e-12) and np.all(pops <= 1 + 1e-12)
    assert pops.sum() == pytest.approx(1.0, abs=1e-10)
    rho = ss.rho
    assert np.allclose(rho, rho.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(rho).min() >= -1e-9


@settings(max_examples=60, deadline=None)
@given(params_st)
def test_exchange_symmetry(p):
    a = steady_state(build_bloch_system(p))
    b = steady_state(build_bloch_system(p.swapped()))
    assert b.p1 == pytest.approx(a.p2, abs=1e-12)
    assert b.p2 == pytest.approx(a.p1, abs=1e-12)
    assert b.populations[0] == pytest.approx(a.populations[1], abs=1e-12)
    assert np.allclose(b.x_ss, a.x_ss[BEAM_SWAP], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_dark_state_property(p, r1, r2):
    q = p.replace(gamma_d=0.0, delta2=p.delta1, rabi1=r1 * G, rabi2=r2 * G)
    ss = steady_state(build_bloch_system(q))
    assert abs(ss.p1) <= 1e-12 and abs(ss.p2) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(params_st)
def test_detuning_reflection(p):
    a = steady_state(build_bloch_system(p))
    b = steady_state(build_bloch_system(p.replace(delta1=-p.delta1, delta2=-p.delta2)))
    assert b.p1 == pytest.approx(-np.conj(a.p1), abs=1e-12)
    assert b.p2 == pytest.approx(-np.conj(a.p2), abs=1e-12)


# -- DC transmission ----------------------------------------------------------


def test_transmission_perfect_eit():
    p = SystemParams(gamma_d=0.0)
    t1, t2 = dc_transmission(steady_state(build_bloch_system(p)), p)
    assert t1 == pytest.approx(1.0, abs=1e-12) and t2 == pytest.approx(1.0, abs=1e-12)


def test_transmission_fixture():
    p = reference_params(0.2, 3.0)
    t1, t2 = dc_transmission(steady_state(build_bloch_system(p)), p)
    assert t1 == pytest.approx(9.800257671504e-01, rel=1e-11)
    assert t2 == pytest.approx(9.824164935103e-01, rel=1e-11)


@settings(max_examples=40, deadline=None)
@given(params_st, st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_transmission_never_negative(p, k1, k2):
    # |1 + i kappa p|^2 >= 0 for any coupling, so the clamp never triggers
    q = p.replace(kappa1=k1, kappa2=k2)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NegativeTransmissionWarning)
        t1, t2 = dc_transmission(steady_state(build_bloch_system(q)), q)
    assert t1 >= 0 and t2 >= 0
