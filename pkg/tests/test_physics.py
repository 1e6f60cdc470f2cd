import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gprterrain.physics import (
    C_LIGHT,
    EPS0,
    Material,
    Permittivity,
    PhysicsConstants,
    PhysicsDomainError,
    complex_permittivity,
    depth_from_twt,
    relative_permittivity,
    reflection_coefficient,
    twt_from_depth,
    velocity_consistent,
    velocity_from_kappa,
)

kappas = st.floats(min_value=1.0, max_value=100.0, allow_nan=False)


class TestPermittivity:
    def test_complex_form(self):
        assert complex_permittivity(Permittivity(5.0, 0.5)) == complex(5.0, -0.5)

    def test_lossless_is_real(self):
        assert complex_permittivity(Permittivity(3.0)).imag == 0.0

    @pytest.mark.parametrize("store,loss", [(0.0, 0.0), (-1.0, 0.0), (1.0, -0.1)])
    def test_invalid(self, store, loss):
        with pytest.raises(PhysicsDomainError):
            Permittivity(store, loss)

    def test_eps0_literal(self):
        assert PhysicsConstants().eps0 == 8.8541878128e-12

    def test_relative_of_vacuum_is_one(self):
        assert relative_permittivity(EPS0) == 1.0

    def test_relative_water_like(self):
        assert relative_permittivity(80 * EPS0) == pytest.approx(80.0, rel=1e-12)

    def test_relative_rejects_nonpositive(self):
        with pytest.raises(PhysicsDomainError):
            relative_permittivity(0.0)


class TestReflection:
    def test_hand_value(self):
        # (2 - 3) / (2 + 3)
        assert reflection_coefficient(4.0, 9.0) == pytest.approx(-0.2, abs=1e-15)

    def test_air_to_sand(self):
        assert reflection_coefficient(1.0, 4.0) == pytest.approx(-1.0 / 3.0, abs=1e-15)

    def test_equal_is_zero(self):
        assert reflection_coefficient(7.3, 7.3) == 0.0

    @given(kappas, kappas)
    def test_antisymmetric_and_bounded(self, k1, k2):
        r = reflection_coefficient(k1, k2)
        assert r == pytest.approx(-reflection_coefficient(k2, k1), abs=1e-15)
        assert abs(r) < 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(PhysicsDomainError):
            reflection_coefficient(0.0, 4.0)


class TestTravelTime:
    def test_depth_hand_value(self):
        assert depth_from_twt(0.1, 20.0) == pytest.approx(1.0)

    def test_twt_hand_value(self):
        assert twt_from_depth(0.1, 1.0) == pytest.approx(20.0)

    @given(st.floats(0.01, 0.3), st.floats(0.0, 100.0))
    def test_round_trip(self, v, d):
        assert abs(depth_from_twt(v, twt_from_depth(v, d)) - d) < 1e-12

    @pytest.mark.parametrize("v,t", [(0.0, 1.0), (-0.1, 1.0), (0.1, -1.0)])
    def test_domain(self, v, t):
        with pytest.raises(PhysicsDomainError):
            depth_from_twt(v, t)


class TestMaterial:
    def test_velocity_from_kappa(self):
        assert velocity_from_kappa(4.0) == pytest.approx(C_LIGHT / 2)

    def test_from_kappa_is_consistent(self):
        m = Material.from_kappa("sand", 4.0, 0.01)
        assert velocity_consistent(m)

    def test_inconsistent_velocity_detected(self):
        m = Material("odd", 4.0, 0.2)
        assert not velocity_consistent(m)

    @pytest.mark.parametrize("kappa,v", [(0.5, 0.1), (4.0, 0.0), (4.0, 0.31)])
    def test_invalid(self, kappa, v):
        with pytest.raises(PhysicsDomainError):
            Material("bad", kappa, v)

    def test_vacuum_speed_allowed(self):
        assert math.isclose(Material.from_kappa("air", 1.0).velocity, C_LIGHT)
