import math

import numpy as np
import pytest

from critwave.experiments import (assemble_box_exact, random_box_closure,
                                  random_orthogonal_residual)
from critwave.fields import RadialField, State, sample_W_family, BoostParams
from critwave.functionals import (energy_E, functional_K,
                                  h1_seminorm_sq, l2_inner, l2_norm_sq,
                                  norm_H, norm_H_sq)
from critwave.grids import Box3DGrid
from critwave.modulation import (SignAmbiguityError, assemble_state,
                                 distance_dW, fit_modulation,
                                 linearized_norm_sq, quadratic_form_L,
                                 reference_J, region_predicates,
                                 sign_functional, split_modes,
                                 superquadratic_C)


@pytest.fixture(scope="module")
def ctx(spectral, static_grid, thresholds):
    g = static_grid
    return {
        "g": g,
        "W": spectral.W_on(g),
        "rho": spectral.rho_on(g),
        "zeros": RadialField(g, np.zeros(g.n)),
        "spec": spectral,
        "th": thresholds,
    }


class TestFit:
    def test_exact_ground_state(self, ctx):
        s = State(RadialField(ctx["g"], ctx["W"]), ctx["zeros"])
        fit = fit_modulation(s, ctx["spec"], ctx["th"])
        assert fit.converged
        assert fit.sign_s == 1
        assert fit.sigma == 0.0
        assert norm_H(fit.v) < 1e-10

    def test_scaled_member(self, ctx):
        s = sample_W_family(BoostParams(sigma=0.1), ctx["g"])
        fit = fit_modulation(s, ctx["spec"], ctx["th"])
        assert fit.converged
        assert fit.sigma == pytest.approx(0.1, abs=1e-6)
        assert norm_H(fit.v) < 1e-6

    def test_rho_direction_needs_no_modulation(self, ctx):
        # <rho|Lambda_0 rho> = 0 makes W + eps rho already orthogonal at sigma=0
        s = State(RadialField(ctx["g"], ctx["W"] + 0.01 * ctx["rho"]),
                  ctx["zeros"])
        fit = fit_modulation(s, ctx["spec"], ctx["th"])
        assert fit.converged
        assert abs(fit.sigma) < 1e-7
        assert np.max(np.abs(fit.v.u1.values - 0.01 * ctx["rho"])) < 1e-6

    def test_orthogonality_invariant(self, ctx, rng):
        g, spec, th = ctx["g"], ctx["spec"], ctx["th"]
        lam0 = RadialField(g, spec.lambda0_rho_on(g))
        for _ in range(5):
            v = random_orthogonal_residual(spec, g, rng,
                                           amplitude=float(rng.uniform(0.01, 0.1)))
            u = assemble_state(spec, 1, float(rng.uniform(-0.4, 0.4)),
                               np.zeros(3), v)
            fit = fit_modulation(u, spec, th)
            assert fit.converged
            nv = norm_H(fit.v)
            assert abs(l2_inner(fit.v.u1, lam0)) <= th.tol_orth * nv * 1.5

    def test_sign_ambiguity_far_state(self, ctx):
        # a state orthogonal-ish to both signs triggers the ambiguity error
        g = ctx["g"]
        bump = RadialField(g, 0.3 * np.exp(-((g.r - 30.0) / 2.0) ** 2))
        with pytest.raises(SignAmbiguityError):
            fit_modulation(State(bump, ctx["zeros"]), ctx["spec"], ctx["th"])

    def test_no_convergence_outside_capture(self, ctx):
        g = ctx["g"]
        s = State(RadialField(g, 3.0 * ctx["W"]), ctx["zeros"])
        fit = fit_modulation(s, ctx["spec"], ctx["th"], sign_hint=1)
        assert not fit.converged
        assert fit.v is None


class TestRoundTrip:
    def test_radial_invariant(self, ctx, rng):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        for _ in range(10):
            v = random_orthogonal_residual(spec, g, rng,
                                           amplitude=float(rng.uniform(0.002, 0.08)))
            sgn = int(rng.choice([-1, 1]))
            sigma = float(rng.uniform(-0.5, 0.5))
            u = assemble_state(spec, sgn, sigma, np.zeros(3), v)
            fit = fit_modulation(u, spec, th)
            assert fit.converged
            assert fit.sign_s == sgn
            assert abs(fit.sigma - sigma) <= 1e-6
            assert norm_H(fit.v - v) <= 1e-6

    def test_box_recovery(self, ctx, rng):
        spec, th = ctx["spec"], ctx["th"]
        box = Box3DGrid(20.0, 128)
        for _ in range(2):
            closure = random_box_closure(spec, box, rng, amplitude=0.02)
            sigma = float(rng.uniform(0.0, 0.3))
            c = rng.uniform(-0.4, 0.4, size=3)
            u = assemble_box_exact(spec, box, +1, sigma, c, closure)
            fit = fit_modulation(u, spec, th)
            assert fit.converged
            assert abs(fit.sigma - sigma) <= 1e-6
            assert np.max(np.abs(fit.c - c)) <= 1e-6

    def test_box_soliton_member(self, ctx):
        spec, th = ctx["spec"], ctx["th"]
        box = Box3DGrid(20.0, 128)
        s = sample_W_family(BoostParams(0.1, (0, 0, 0), (0.2, 0.0, 0.0)), box)
        fit = fit_modulation(s, spec, th)
        assert fit.converged
        assert abs(fit.sigma - 0.1) <= 1e-6
        assert np.max(np.abs(fit.c - np.array([0.2, 0.0, 0.0]))) <= 1e-6


class TestModeSplit:
    def test_pure_unstable_mode(self, ctx):
        spec, g = ctx["spec"], ctx["g"]
        eps = 1e-3
        gp, _ = spec.mode_states(g)
        s = State(RadialField(g, ctx["W"] + eps * gp.u1.values),
                  RadialField(g, eps * gp.u2.values))
        fit = fit_modulation(s, spec, ctx["th"])
        ms = split_modes(fit, spec)
        assert ms.lambda_plus == pytest.approx(eps, rel=1e-6)
        assert abs(ms.lambda_minus) <= 1e-9
        assert norm_H(ms.gamma) <= 1e-6

    def test_rho_pair_amplitudes(self, ctx):
        spec, g = ctx["spec"], ctx["g"]
        s = State(RadialField(g, ctx["W"] + 0.01 * ctx["rho"]), ctx["zeros"])
        ms = split_modes(fit_modulation(s, spec, ctx["th"]), spec)
        assert ms.lambda1 == pytest.approx(0.01, rel=1e-10)
        assert abs(ms.lambda2) <= 1e-12
        # change of variables consistency
        k = spec.k
        assert ms.lambda1 == pytest.approx(
            (ms.lambda_plus + ms.lambda_minus) / math.sqrt(2 * k), rel=1e-12)
        assert ms.lambda2 == pytest.approx(
            math.sqrt(k / 2) * (ms.lambda_plus - ms.lambda_minus), abs=1e-12)

    def test_reconstruction(self, ctx, rng):
        spec, g, th = ctx["spec"], ctx["g"], ctx["th"]
        v = random_orthogonal_residual(spec, g, rng, amplitude=0.03)
        u = assemble_state(spec, 1, 0.1, np.zeros(3), v)
        fit = fit_modulation(u, spec, th)
        ms = split_modes(fit, spec)
        gp, gm = spec.mode_states(g)
        recon = (ms.lambda_plus * gp + ms.lambda_minus * gm + ms.gamma)
        assert norm_H(recon - fit.v * float(fit.sign_s)) <= 1e-8
        # omega-orthogonality of the remainder
        from critwave.functionals import symplectic_omega
        assert abs(symplectic_omega(ms.gamma, gp)) <= 1e-9
        assert abs(symplectic_omega(ms.gamma, gm)) <= 1e-9

    def test_sign_adjusted_frame(self, ctx):
        # amplitudes of -(W + eps rho) match those of +(W + eps rho)
        spec, g = ctx["spec"], ctx["g"]
        up = State(RadialField(g, ctx["W"] + 0.01 * ctx["rho"]), ctx["zeros"])
        um = up * -1.0
        msp = split_modes(fit_modulation(up, spec, ctx["th"]), spec)
        msm = split_modes(fit_modulation(um, spec, ctx["th"]), spec)
        assert msm.lambda1 == pytest.approx(msp.lambda1, rel=1e-10)


class TestLinearizedNorm:
    def test_zero(self, ctx):
        s = State(RadialField(ctx["g"], ctx["W"]), ctx["zeros"])
        ms = split_modes(fit_modulation(s, ctx["spec"], ctx["th"]), ctx["spec"])
        assert linearized_norm_sq(ms, ctx["spec"]) <= 1e-20

    def test_pure_lambda1_mode(self, ctx):
        spec = ctx["spec"]
        eps = 1e-3
        s = State(RadialField(ctx["g"], ctx["W"] + eps * ctx["rho"]),
                  ctx["zeros"])
        ms = split_modes(fit_modulation(s, spec, ctx["th"]), spec)
        assert linearized_norm_sq(ms, spec) == pytest.approx(
            0.5 * spec.k ** 2 * eps ** 2, rel=1e-6)

    def test_equivalence_with_H_norm(self, ctx, rng):
        # ||v||_E^2 / ||v||_H^2 stays in a fixed positive window (sampled)
        spec, g, th = ctx["spec"], ctx["g"], ctx["th"]
        ratios = []
        for _ in range(20):
            v = random_orthogonal_residual(spec, g, rng,
                                           amplitude=float(rng.uniform(0.005, 0.05)))
            u = assemble_state(spec, 1, 0.0, np.zeros(3), v)
            fit = fit_modulation(u, spec, th)
            ms = split_modes(fit, spec)
            ratios.append(linearized_norm_sq(ms, spec) / norm_H_sq(fit.v))
        assert min(ratios) > 0.05
        assert max(ratios) < 20.0


class TestSuperquadratic:
    def test_zero_input(self, ctx):
        assert superquadratic_C(ctx["zeros"]) == 0.0

    def test_cubic_scaling(self, ctx):
        g = ctx["g"]
        vals = []
        for eps in (1e-2, 1e-3):
            c = superquadratic_C(RadialField(g, eps * ctx["rho"]))
            vals.append(c / eps ** 3)
        # Richardson in eps: the ratio approaches a finite nonzero limit
        assert vals[0] == pytest.approx(vals[1], rel=5e-3)
        assert abs(vals[1]) > 0.1

    def test_cubic_bound_on_samples(self, ctx, rng):
        # |C(v)| <~ ||W^(2*-3) v^3||_1 + ||v||_(2*)^(2*)
        g = ctx["g"]
        w = ctx["W"]
        for _ in range(5):
            amp = float(rng.uniform(0.01, 0.3))
            f = amp * np.exp(-((g.r - rng.uniform(0, 4)) / rng.uniform(1, 3)) ** 2)
            c_val = abs(superquadratic_C(RadialField(g, f)))
            bound = (g.quad_meas(w ** 3 * np.abs(f) ** 3)
                     + g.quad_meas(np.abs(f) ** 6))
            assert c_val <= 10.0 * bound

    def test_energy_expansion(self, ctx):
        # E(W_vec + v) - J(W) = -k l+ l- + <L gamma|gamma>/2 - C(v)
        spec, g, th = ctx["spec"], ctx["g"], ctx["th"]
        amp = 1e-3
        b1 = amp * np.exp(-((g.r - 2.0) / 1.5) ** 2)
        b2 = 0.5 * amp * np.exp(-((g.r - 3.0) / 2.0) ** 2)
        s = State(RadialField(g, ctx["W"] + b1), RadialField(g, b2))
        fit = fit_modulation(s, spec, th)
        ms = split_modes(fit, spec)
        lhs = energy_E(s) - reference_J(spec, g)
        quad_g = (quadratic_form_L(spec, ms.gamma.u1)
                  + l2_norm_sq(ms.gamma.u2))
        w_adj = fit.v * float(fit.sign_s)
        rhs = (-spec.k * ms.lambda_plus * ms.lambda_minus + 0.5 * quad_g
               - superquadratic_C(w_adj.u1))
        assert abs(lhs - rhs) <= 1e-8


class TestDistance:
    def test_zero_on_manifold(self, ctx):
        # d_W = sqrt(E - J(W) + ...) amplifies the O(1e-12) sigma-drift of
        # the energy quadrature; the 1e-6 statement holds for moderate
        # scales, with a ~1e-6-scale floor growing past |sigma| ~ 0.4
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        for sigma in (-0.4, 0.0, 0.2):
            s = sample_W_family(BoostParams(sigma=sigma), g)
            rep = distance_dW(s, spec, th)
            assert rep.dW <= 1e-6
            assert rep.regime == "inner"
        s = sample_W_family(BoostParams(), g) * -1.0
        assert distance_dW(s, spec, th).dW <= 1e-6
        wide = sample_W_family(BoostParams(sigma=0.7), g)
        assert distance_dW(wide, spec, th).dW <= 5e-6

    @pytest.mark.parametrize("eps", [1e-3, 1e-4])
    def test_unstable_pair_value(self, ctx, eps):
        # d_W^2 = E - J(W) + k^2 lambda_1^2 = k^2 eps^2 / 2 + O(eps^3)
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        s = State(RadialField(g, ctx["W"] + eps * ctx["rho"]), ctx["zeros"])
        rep = distance_dW(s, spec, th)
        expect_sq = 0.5 * spec.k ** 2 * eps ** 2
        assert rep.dW ** 2 == pytest.approx(expect_sq, rel=0.02)
        assert rep.regime == "inner"

    def test_outer_equivalence_with_lambda1(self, ctx):
        # in the outer part of the inner region, d_W ~ k |lambda_1|
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        ratios = []
        for eps in (5e-3, 2e-2, 5e-2):
            s = State(RadialField(g, ctx["W"] + eps * ctx["rho"]), ctx["zeros"])
            fit = fit_modulation(s, spec, th)
            ms = split_modes(fit, spec)
            rep = distance_dW(s, spec, th, fit=fit)
            ratios.append(rep.dW / abs(ms.lambda1))
        assert max(ratios) / min(ratios) < 1.5
        assert min(ratios) > 0.3

    def test_blend_consistency(self, ctx):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        s = State(RadialField(g, 0.5 * ctx["W"]), ctx["zeros"])
        rep = distance_dW(s, spec, th)
        assert rep.regime == "outer"
        assert rep.dW == rep.d0

    def test_lipschitz_shadow(self, ctx, rng):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        base = State(RadialField(g, ctx["W"] + 0.05 * ctx["rho"]), ctx["zeros"])
        d_base = distance_dW(base, spec, th).dW
        for _ in range(5):
            step_norm = float(rng.uniform(0.003, 0.03))
            bump = np.exp(-((g.r - rng.uniform(0, 6)) / rng.uniform(1, 3)) ** 2)
            bump_fld = RadialField(g, bump)
            scale = step_norm / math.sqrt(h1_seminorm_sq(bump_fld))
            other = State(RadialField(g, base.u1.values + scale * bump),
                          base.u2)
            d_other = distance_dW(other, spec, th).dW
            assert abs(d_other - d_base) <= th.L_dW * step_norm


class TestKExpansion:
    def test_linearization_constant(self, ctx, rng):
        # |K(W + v) + (2*-2) <W^(2*-1)|v>| <= C ||v||_H1^2 (frozen C)
        g, th = ctx["g"], ctx["th"]
        w = ctx["W"]
        w5 = w ** 5
        for _ in range(10):
            amp = float(rng.uniform(0.001, 0.3))
            f = amp * np.exp(-((g.r - rng.uniform(0, 6)) / rng.uniform(0.5, 3)) ** 2)
            k_val = functional_K(RadialField(g, w + f))
            lin = -4.0 * g.quad_meas(w5 * f)
            h1 = h1_seminorm_sq(RadialField(g, f))
            assert abs(k_val - lin) <= th.K_expansion_const * h1


class TestSign:
    def test_scaling_rules(self, ctx):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        zeros = ctx["zeros"]
        assert sign_functional(State(RadialField(g, 0.5 * ctx["W"]), zeros),
                               spec, th) == +1
        assert sign_functional(State(RadialField(g, 1.5 * ctx["W"]), zeros),
                               spec, th) == -1

    def test_inner_rule(self, ctx):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        zeros = ctx["zeros"]
        up = State(RadialField(g, ctx["W"] + 1e-3 * ctx["rho"]), zeros)
        um = State(RadialField(g, ctx["W"] - 1e-3 * ctx["rho"]), zeros)
        assert sign_functional(up, spec, th) == -1
        assert sign_functional(um, spec, th) == +1

    def test_u_to_minus_u_symmetry(self, ctx):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        zeros = ctx["zeros"]
        for eps in (1e-3, -1e-3):
            s = State(RadialField(g, ctx["W"] + eps * ctx["rho"]), zeros)
            assert sign_functional(s, spec, th) == \
                sign_functional(s * -1.0, spec, th)

    def test_overlap_consistency(self, ctx):
        # where both rules apply they must agree (raises otherwise)
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        zeros = ctx["zeros"]
        for eta in (0.02, 0.05, 0.1, -0.05):
            s = State(RadialField(g, ctx["W"] + eta * ctx["rho"]), zeros)
            rep = distance_dW(s, spec, th)
            if th.delta_S <= rep.dW <= th.delta_E:
                val = sign_functional(s, spec, th, report=rep)
                assert val == (-1 if eta > 0 else +1)

    def test_zero_state_positive(self, ctx):
        spec, th = ctx["spec"], ctx["th"]
        zeros = ctx["zeros"]
        s = State(zeros, zeros)
        assert sign_functional(s, spec, th) == +1


class TestRegions:
    def test_ground_state_membership(self, ctx):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        preds = region_predicates(
            State(RadialField(g, ctx["W"]), ctx["zeros"]), spec, th)
        assert preds["in_H_star"] is True
        assert preds["in_H_X"] is False

    def test_zero_state_membership(self, ctx):
        spec, th = ctx["spec"], ctx["th"]
        preds = region_predicates(State(ctx["zeros"], ctx["zeros"]), spec, th)
        assert preds["in_H_star"] and preds["in_H_X"]
        assert preds["in_variational_zone"]

    def test_doubled_ground_state(self, ctx):
        spec, th, g = ctx["spec"], ctx["th"], ctx["g"]
        s = State(RadialField(g, 2.0 * ctx["W"]), ctx["zeros"])
        preds = region_predicates(s, spec, th)
        assert preds["E"] < 0.0
        assert preds["in_H_star"] is True
