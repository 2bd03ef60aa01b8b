import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ranimport.kinetics import (C, CONSERVED, CYTOPLASM, LOCALIZATION, NUCLEUS, RD, RT, SPECIES,
                                STOICHIOMETRY, TC, TR, T, KineticConstants, compartment_name,
                                rate_m1, rate_m2, rate_mass_action, reaction_rates, source_jacobian,
                                source_vector)

K = KineticConstants()
states = arrays(np.float64, 6, elements=st.floats(0, 50, allow_nan=False))


def test_species_order():
    assert SPECIES == ("Rt", "Rd", "C", "T", "Tr", "Tc")
    assert (RT, RD, C, T, TR, TC) == tuple(range(6))


def test_default_constants():
    expected = dict(q_cat1=20.1, K_M1=0.7, q_cat2=8.0, K_M2=1.1, k1=0.1, k_m1=0.3, k2=0.15, k3=0.1,
                    RanGAP=0.5, RCC1=0.7)
    for name, value in expected.items():
        assert getattr(K, name) == value


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_constants_must_be_positive(bad):
    with pytest.raises(ValueError):
        KineticConstants(k1=bad)


def test_localization():
    assert LOCALIZATION["m1"] == (CYTOPLASM,)
    assert LOCALIZATION["m2"] == (NUCLEUS,)
    assert set(LOCALIZATION["r1"]) == set(LOCALIZATION["r-1"]) == {CYTOPLASM, NUCLEUS}
    assert LOCALIZATION["r2"] == (CYTOPLASM,)
    assert LOCALIZATION["r3"] == (NUCLEUS,)
    assert compartment_name(1) == CYTOPLASM and compartment_name(2) == NUCLEUS
    with pytest.raises(ValueError):
        compartment_name("membrane")


def test_rate_m1():
    assert rate_m1(0.0) == 0.0
    assert rate_m1(0.7) == pytest.approx(5.025, rel=1e-12)
    assert rate_m1(100.0) == pytest.approx(10.05, rel=0.01)


def test_rate_m2():
    assert rate_m2(0.0) == 0.0
    assert rate_m2(1.1) == pytest.approx(2.8, rel=1e-12)
    assert rate_m2(3.0) == pytest.approx(8.0 * 0.7 * 3 / 4.1, rel=1e-12)
    assert rate_m2(3.0) == pytest.approx(4.0976, abs=1e-4)


def test_mass_action():
    assert rate_mass_action(K.k1, 1.0, 1.0) == pytest.approx(0.1)
    assert rate_mass_action(K.k_m1, 2.0) == pytest.approx(0.6)
    assert rate_mass_action(K.k2, 0.0, 5.0) == 0.0
    assert rate_mass_action(K.k3, 5.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        rate_mass_action(1.0, float("nan"))


def test_negative_undershoots_clamped_inside_rates_only():
    u = np.array([-1e-3, 1.0, 1.0, 1.0, 1.0, 1.0])
    r = reaction_rates(u, CYTOPLASM)
    assert r[0] == 0.0 and r[2] == 0.0
    assert u[0] == -1e-3


@pytest.mark.parametrize("comp", [CYTOPLASM, NUCLEUS])
def test_zero_state_has_zero_source(comp):
    np.testing.assert_array_equal(source_vector(np.zeros(6), comp), 0.0)


def test_stoichiometry_conserves_lumped_quantities():
    for w in CONSERVED.values():
        np.testing.assert_array_equal(STOICHIOMETRY @ w, 0.0)


@pytest.mark.parametrize("comp", [CYTOPLASM, NUCLEUS])
def test_closure_identities_over_random_states(comp):
    rng = np.random.default_rng(3)
    u = rng.uniform(0, 20, size=(1000, 6))
    f = source_vector(u, comp)
    scale = np.abs(f).max(axis=1) + 1.0
    for combo in ([RT, RD, TR], [C, TC], [T, TR, TC]):
        assert np.all(np.abs(f[:, combo].sum(axis=1)) <= 1e-12 * scale)


def test_jacobian_at_origin():
    J = source_jacobian(np.zeros(6), CYTOPLASM)
    assert J[RD, RT] == pytest.approx(20.1 * 0.5 / 0.7, rel=1e-12)
    assert J[RD, RT] == pytest.approx(14.357, abs=1e-3)


def test_nuclear_rd_row_depends_only_on_rd():
    rng = np.random.default_rng(4)
    J = source_jacobian(rng.uniform(0.1, 5, 6), NUCLEUS)
    row = J[RD].copy()
    assert row[RD] != 0
    row[RD] = 0
    np.testing.assert_array_equal(row, 0.0)
    # cytoplasm: free cargo and Tc react only with receptor
    Jc = source_jacobian(rng.uniform(0.1, 5, 6), CYTOPLASM)
    np.testing.assert_array_equal(Jc[C, [RT, RD, TR, TC]], 0.0)


@pytest.mark.parametrize("comp", [CYTOPLASM, NUCLEUS])
def test_jacobian_matches_finite_differences(comp):
    rng = np.random.default_rng(5)
    for _ in range(100):
        u = rng.uniform(0.05, 10, 6)
        J = source_jacobian(u, comp)
        fd = np.empty((6, 6))
        for j in range(6):
            h = 1e-6 * max(1.0, u[j])
            e = np.zeros(6)
            e[j] = h
            fd[:, j] = (source_vector(u + e, comp) - source_vector(u - e, comp)) / (2 * h)
        np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-6 * np.abs(J).max())


@settings(max_examples=200, deadline=None)
@given(states, st.sampled_from([CYTOPLASM, NUCLEUS]))
def test_source_is_vectorised(u, comp):
    batch = np.stack([u, 2 * u])
    f = source_vector(batch, comp)
    np.testing.assert_allclose(f[0], source_vector(u, comp))
    for w in CONSERVED.values():
        assert abs(f[1] @ w) <= 1e-9 * (1 + np.abs(f[1]).max())
