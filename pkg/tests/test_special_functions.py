import math
import random

import numpy as np
import pytest

from casimir_spheres import special_functions as sf

from oracles import ln_bessel_i_ref, ln_bessel_k_ref, sympy_3j


class TestLogScaled:
    def test_multiplication_is_exact(self):
        a = sf.LogScaled(-1, 3.25)
        b = sf.LogScaled(-1, -1.5)
        c = a * b
        assert c.sign == 1
        assert c.ln_abs == 3.25 + (-1.5)

    def test_division(self):
        a = sf.LogScaled(1, 2.0)
        b = sf.LogScaled(-1, 0.5)
        c = a / b
        assert c.sign == -1 and c.ln_abs == 1.5
        with pytest.raises(ZeroDivisionError):
            a / sf.LogScaled.zero()

    def test_add_max_shift(self):
        a = sf.LogScaled.from_float(3.0)
        b = sf.LogScaled.from_float(-2.0)
        assert (a + b).to_float() == pytest.approx(1.0, rel=1e-15)
        assert (a + (-a)).sign == 0
        assert (a + sf.LogScaled.zero()).to_float() == pytest.approx(3.0, rel=1e-15)

    def test_overflow_detected(self):
        big = sf.LogScaled(1, 1e5)
        with pytest.raises(OverflowError):
            big.to_float()
        assert sf.LogScaled(1, 700.0).to_float() > 0

    def test_zero_representation(self):
        z = sf.LogScaled.from_float(0.0)
        assert z.sign == 0
        assert z.to_float() == 0.0


# frozen oracle values (mpmath, 50 digits)
I_HALF_1 = 0.93767488824548764672
K_HALF_1 = 0.46106850444789455844
K_3HALF_1 = 0.92213700889578911688
IP_HALF_1 = 0.76236277047022362315
KP_HALF_1 = -0.69160275667184183766


class TestBessel:
    def test_frozen_closed_forms(self):
        assert sf.bessel_i_half(0, 1.0).to_float() == pytest.approx(I_HALF_1, rel=1e-14)
        assert sf.bessel_k_half(0, 1.0).to_float() == pytest.approx(K_HALF_1, rel=1e-14)
        assert sf.bessel_k_half(1, 1.0).to_float() == pytest.approx(K_3HALF_1, rel=1e-14)
        assert sf.bessel_i_half_prime(0, 1.0).to_float() == pytest.approx(IP_HALF_1, rel=1e-13)
        assert sf.bessel_k_half_prime(0, 1.0).to_float() == pytest.approx(KP_HALF_1, rel=1e-13)

    def test_kprime_closed_form(self):
        # K'_{1/2}(x) = -sqrt(pi/(2x)) e^-x (1 + 1/(2x))
        for x in (0.3, 1.7, 9.0):
            ref = -math.sqrt(math.pi / (2 * x)) * math.exp(-x) * (1 + 1 / (2 * x))
            assert sf.bessel_k_half_prime(0, x).to_float() == pytest.approx(ref, rel=1e-13)

    def test_domain_errors(self):
        for fn in (sf.bessel_i_half, sf.bessel_k_half,
                   sf.bessel_i_half_prime, sf.bessel_k_half_prime):
            with pytest.raises(ValueError):
                fn(0, 0.0)
            with pytest.raises(ValueError):
                fn(0, -1.0)
            with pytest.raises(ValueError):
                fn(-1, 1.0)

    def test_small_x_leading_power(self):
        # I_{1/2}(x) ~ sqrt(2x/pi): ln_abs tracks (1/2) ln x
        v1 = sf.bessel_i_half(0, 1e-8)
        v2 = sf.bessel_i_half(0, 1e-10)
        assert v1.ln_abs - v2.ln_abs == pytest.approx(0.5 * math.log(1e2), rel=1e-10)

    @pytest.mark.parametrize("l", [0, 3, 40, 400, 2000])
    @pytest.mark.parametrize("x", [1e-6, 0.3, 7.0, 1e3])
    def test_against_reference(self, l, x):
        # the stored ln is ulp-limited: |ln| * eps is the resolution floor
        tol_i = max(1e-12, 3e-16 * abs(ln_bessel_i_ref(l, x)))
        tol_k = max(1e-12, 3e-16 * abs(ln_bessel_k_ref(l, x)))
        assert sf.bessel_i_half(l, x).ln_abs == pytest.approx(ln_bessel_i_ref(l, x), abs=tol_i)
        assert sf.bessel_k_half(l, x).ln_abs == pytest.approx(ln_bessel_k_ref(l, x), abs=tol_k)

    def test_extreme_argument_corner(self):
        for l in (0, 100):
            assert sf.bessel_i_half(l, 1e5).ln_abs == pytest.approx(
                ln_bessel_i_ref(l, 1e5), abs=3e-16 * 1e5)
            assert sf.bessel_k_half(l, 1e5).ln_abs == pytest.approx(
                ln_bessel_k_ref(l, 1e5), abs=3e-16 * 1e5)

    @pytest.mark.parametrize("l,x", [(1, 10.0), (7, 10.0), (60, 10.0),
                                     (500, 2.0), (2000, 80.0)])
    def test_recurrences(self, l, x):
        # I_{nu-1} - I_{nu+1} = (2nu/x) I_nu and the K analogue
        nu = l + 0.5
        im = sf.bessel_i_half(l - 1, x)
        i0 = sf.bessel_i_half(l, x)
        ip = sf.bessel_i_half(l + 1, x)
        lhs = im + (-ip)
        rhs = sf.LogScaled(1, math.log(2 * nu / x)) * i0
        assert lhs.ln_abs - rhs.ln_abs == pytest.approx(0.0, abs=1e-11)
        km = sf.bessel_k_half(l - 1, x)
        k0 = sf.bessel_k_half(l, x)
        kp = sf.bessel_k_half(l + 1, x)
        lhs = km + (-kp)
        rhs = sf.LogScaled(-1, math.log(2 * nu / x)) * k0
        assert lhs.sign == rhs.sign
        assert lhs.ln_abs - rhs.ln_abs == pytest.approx(0.0, abs=1e-11)

    def test_wronskian_grid(self):
        # x (I K' - I' K) = -1 to 1e-11 across the working domain
        worst = 0.0
        for l in (0, 5, 100, 700, 2000):
            for x in (1e-6, 1e-2, 1.0, 30.0, 1e3, 1e4):
                i = sf.bessel_i_half(l, x)
                k = sf.bessel_k_half(l, x)
                ip = sf.bessel_i_half_prime(l, x)
                kp = sf.bessel_k_half_prime(l, x)
                w = (i * kp) + (-(ip * k))
                worst = max(worst, abs(x * w.to_float() + 1.0))
        assert worst < 1e-11

    def test_wronskian_extreme_corner_ulp_bound(self):
        # at |ln| ~ 1e5 the representation itself limits the identity to a
        # few ulp of the stored logs
        l, x = 2000, 1e5
        i = sf.bessel_i_half(l, x)
        k = sf.bessel_k_half(l, x)
        ip = sf.bessel_i_half_prime(l, x)
        kp = sf.bessel_k_half_prime(l, x)
        w = (i * kp) + (-(ip * k))
        floor = 8.0 * np.finfo(float).eps * max(abs(i.ln_abs), abs(k.ln_abs))
        assert abs(x * w.to_float() + 1.0) < floor


class TestWigner3j:
    def test_frozen_examples(self):
        assert sf.wigner3j_zero(1, 1, 2) == pytest.approx(math.sqrt(2 / 15), rel=1e-14)
        assert sf.wigner3j_zero(1, 1, 1) == 0.0
        assert sf.wigner3j_zero(5, 3, 1) == 0.0
        assert sf.wigner3j_zero(0, 0, 0) == 1.0
        assert sf.wigner3j_m(1, 1, 2, 1) == pytest.approx(1 / math.sqrt(30), rel=1e-14)

    def test_parity_zero_is_exact(self):
        for l1, l2, l3 in [(1, 1, 1), (2, 2, 1), (10, 9, 2), (40, 40, 39)]:
            if (l1 + l2 + l3) % 2 == 1:
                assert sf.wigner3j_zero(l1, l2, l3) == 0.0

    def test_out_of_range_m(self):
        assert sf.wigner3j_m(2, 3, 4, 3) == 0.0
        assert sf.wigner3j_m(2, 3, 9, 1) == 0.0

    def test_ll0_closed_form(self):
        for l, m in [(1, 0), (7, 3), (40, -12), (300, 100)]:
            ref = (-1) ** (l - m) / math.sqrt(2 * l + 1)
            assert sf.wigner3j_m(l, l, 0, m) == pytest.approx(ref, rel=1e-12)

    def test_against_racah_oracle(self):
        rng = random.Random(11)
        for _ in range(60):
            l1 = rng.randint(0, 40)
            l2 = rng.randint(0, 40)
            l3 = rng.randint(abs(l1 - l2), l1 + l2)
            m = rng.randint(-min(l1, l2), min(l1, l2))
            ref = sympy_3j(l1, l2, l3, m, -m, 0)
            got = sf.wigner3j_m(l1, l2, l3, m)
            if ref == 0.0:
                assert abs(got) < 1e-13
            else:
                assert got == pytest.approx(ref, rel=2e-12)
            ref0 = sympy_3j(l1, l2, l3, 0, 0, 0)
            got0 = sf.wigner3j_zero(l1, l2, l3)
            if ref0 == 0.0:
                assert got0 == 0.0
            else:
                assert got0 == pytest.approx(ref0, rel=2e-13)

    @pytest.mark.parametrize("l1,l2,l3,m", [(300, 280, 100, 40),
                                            (500, 470, 60, 11)])
    def test_large_l_spot_checks(self, l1, l2, l3, m):
        assert sf.wigner3j_m(l1, l2, l3, m) == pytest.approx(
            sympy_3j(l1, l2, l3, m, -m, 0), rel=1e-12)

    @pytest.mark.parametrize("l1,l2,m", [(200, 200, 0), (200, 180, 37),
                                         (150, 200, 150), (2000, 1900, 55)])
    def test_orthogonality(self, l1, l2, m):
        ln, sg = sf.wigner3j_m_vector(l1, l2, m)
        js = np.arange(abs(l1 - l2), l1 + l2 + 1)
        vals = sg * np.exp(ln)
        assert abs(np.sum((2 * js + 1) * vals ** 2) - 1.0) < 1e-9

    def test_symmetry_relation(self):
        # (l1 l2 l3; m,-m,0) = (-1)^(l1+l2+l3) (l2 l1 l3; -m,m,0)
        rng = random.Random(5)
        for _ in range(40):
            l1 = rng.randint(0, 80)
            l2 = rng.randint(0, 80)
            l3 = rng.randint(abs(l1 - l2), l1 + l2)
            m = rng.randint(-min(l1, l2), min(l1, l2))
            a = sf.wigner3j_m(l1, l2, l3, m)
            b = (-1) ** (l1 + l2 + l3) * sf.wigner3j_m(l2, l1, l3, -m)
            assert a == pytest.approx(b, abs=1e-14 + 1e-12 * abs(a))


class TestDebye:
    def test_validation_bounds(self):
        assert sf.debye_validate(100, 50.0) < 1e-4
        assert sf.debye_validate(20, 20.0) < 1e-2

    def test_eta_monotone(self):
        assert sf.debye_eta(2.0) > sf.debye_eta(1.0)
        zs = np.linspace(0.05, 12.0, 40)
        vals = [sf.debye_eta(z) for z in zs]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_u1_formula(self):
        # u1(z) = (1/sqrt(1+z^2)) (1/8 - 5/(24 (1+z^2))); -1/12 at z -> 0
        assert sf.debye_u1(1e-9) == pytest.approx(-1.0 / 12.0, rel=1e-8)
        z = 1.7
        r2 = 1 + z * z
        assert sf.debye_u1(z) == pytest.approx((0.125 - 5 / (24 * r2)) / math.sqrt(r2), rel=1e-15)

    def test_m1_formula(self):
        c, z = 0.5, 0.9
        r2 = 1 + z * z
        assert sf.debye_m1(c, z) == pytest.approx((c - 0.375 + 7 / (24 * r2)) / math.sqrt(r2), rel=1e-15)
        assert sf.DEBYE.m1(c, z) == sf.debye_m1(c, z)
