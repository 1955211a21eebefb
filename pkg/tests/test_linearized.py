"""Linearized-operator contracts: blocks, constrained solves, kernel
elements, commutator identities, coercivity signs.

Quantities touched by the x-weighted seam (anything pairing Lambda-type
fields against the kernel) are asserted on the big kernel-grid fixture;
whole-spectrum work runs on the small dense grid, where the seam defect is
large but only sign-stable conclusions are drawn.
"""

import dataclasses

import numpy as np
import pytest

import halfwave.linearized as linearized
from halfwave.errors import (
    DegeneracyError,
    SolvabilityError,
    StaleGroundStateError,
)
from halfwave.grids import (
    Field,
    Grid,
    derivative,
    inner_r,
    norm_l2,
    scaling_generator,
    sobolev_norm,
    sqrt_laplacian,
)
from halfwave.linearized import (
    apply,
    apply_linearization,
    build,
    coercivity_spectrum,
    ground_eigenpair,
    kernel_relation_residuals,
    solve_constrained,
)


def rel_residual(op, f, block, target_values, scale_values):
    out = apply(op, f, block).values.real - target_values
    return np.linalg.norm(out) / np.linalg.norm(scale_values)


def smooth_decaying_field(grid, rng, complex_valued=True):
    """Random low-band field on a lattice carrier, under a Gaussian envelope.

    The carrier keeps the spectrum away from xi = 0, where the |xi| symbol
    has its kink; baseband fields would pick up algebraic 1/x^2 tails under
    D and the x-weighted commutator terms would then see the box seam.
    """
    n_modes = 8
    ks = np.arange(-n_modes, n_modes + 1)
    coeffs = rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)
    x = grid.nodes
    base = (
        np.exp(2j * np.pi * np.outer(ks, x) / grid.length) * coeffs[:, None]
    ).sum(axis=0)
    k_carrier = int(round(3.0 * grid.length / (2.0 * np.pi)))
    carrier = np.exp(2j * np.pi * k_carrier * x / grid.length)
    width = grid.length / 12.0
    envelope = np.exp(-((x / width) ** 2))
    values = envelope * carrier * base
    if not complex_valued:
        values = values.real
    return Field(grid, values)


class TestBuild:
    def test_dense_blocks_symmetric(self, dense_operator):
        for a in (dense_operator.l_plus, dense_operator.l_minus):
            asym = np.linalg.norm(a - a.T) / np.linalg.norm(a)
            assert asym <= 1e-10

    def test_dense_blocks_match_spectral_apply(self, dense_operator, rng):
        rng2 = np.random.default_rng(5)
        f = smooth_decaying_field(dense_operator.grid, rng2, complex_valued=False)
        for block, a in (
            ("plus", dense_operator.l_plus),
            ("minus", dense_operator.l_minus),
        ):
            dense = a @ f.values.real
            spectral = dense_operator.apply_values(f.values.real, block)
            assert np.linalg.norm(dense - spectral) <= 1e-10 * np.linalg.norm(dense)

    def test_kernel_residual_invariants(self, operator):
        q = operator.q.q
        grad_q = derivative(q)
        r_minus = rel_residual(operator, q, "minus", 0.0, q.values.real)
        r_plus = rel_residual(
            operator, grad_q, "plus", 0.0, grad_q.values.real
        )
        assert r_minus <= 1e-8
        assert r_plus <= 1e-8

    def test_scaling_direction_relation_converges(self):
        # the seam defect in  B+ (Lambda Q) = -Q  shrinks like L^-1.5;
        # check the law between two boxes at fixed spacing
        from halfwave.ground_state import solve_petviashvili

        residuals = []
        for n, length in ((2**16, 1600.0), (2**17, 3200.0)):
            gs = solve_petviashvili(Grid(n, length))
            op = build(gs)
            lam_q = scaling_generator(gs.q, guard=False)
            residuals.append(
                rel_residual(op, lam_q, "plus", -gs.q.values.real, gs.q.values.real)
            )
        assert residuals[1] < 5e-5
        ratio = residuals[0] / residuals[1]
        assert 2.5 <= ratio <= 3.2  # 2^1.5 = 2.83

    def test_stale_ground_state_rejected(self, dense_operator):
        gs = dense_operator.q
        wrong = dataclasses.replace(
            gs, q=Field(gs.q.grid, 1.01 * gs.q.values)
        )
        with pytest.raises(StaleGroundStateError):
            build(wrong)

    def test_dense_limit_guard(self, operator):
        assert operator.grid.n_points > linearized.DENSE_LIMIT
        with pytest.raises(RuntimeError, match="dense realization"):
            operator.l_plus


class TestSolveConstrained:
    def test_s1_solve_example(self, operator, kernel):
        lam_q = kernel.lambda_q
        res = rel_residual(
            operator, kernel.s1, "minus", lam_q.values.real, lam_q.values.real
        )
        assert res <= 1e-9
        q_hat = operator.q.q.values.real
        q_hat = q_hat / (np.linalg.norm(q_hat) * np.sqrt(operator.grid.dx))
        ortho = abs(inner_r(kernel.s1, Field(operator.grid, q_hat)))
        assert ortho <= 1e-10 * norm_l2(kernel.s1)

    def test_g1_solve_and_sign(self, operator, kernel):
        grad_q = derivative(operator.q.q)
        res = rel_residual(
            operator, kernel.g1, "minus", grad_q.values.real, grad_q.values.real
        )
        assert res <= 1e-9
        assert kernel.inner_products["grad_q_g1"] > 0

    def test_opposite_orientation_solve(self, operator, kernel):
        # solving against -grad Q lands on the mirror of g1
        grad_q = derivative(operator.q.q)
        neg = Field(operator.grid, -grad_q.values.real)
        x = solve_constrained(operator, "minus", neg, [operator.q.q])
        diff = np.linalg.norm(x.values.real + kernel.g1.values.real)
        assert diff <= 1e-9 * np.linalg.norm(kernel.g1.values.real)
        assert inner_r(grad_q, x) < 0

    def test_rho1_pairing_identity(self, operator, kernel):
        res = rel_residual(
            operator,
            kernel.rho1,
            "plus",
            kernel.s1.values.real,
            kernel.s1.values.real,
        )
        assert res <= 1e-9
        q_rho1 = kernel.inner_products["q_rho1"]
        lam_s1 = kernel.inner_products["lambda_q_s1"]
        assert q_rho1 < 0
        assert abs(q_rho1 + lam_s1) <= 1e-6 * abs(lam_s1)

    def test_solvability_error_reports_inner_product(self, operator):
        q = operator.q.q
        with pytest.raises(SolvabilityError) as info:
            solve_constrained(operator, "minus", q, [q])
        err = info.value
        assert err.label == "minus-block kernel"
        assert abs(err.inner_product) > 0.9 * norm_l2(q)

    def test_complex_rhs_rejected(self, dense_operator):
        grid = dense_operator.grid
        bad = Field(grid, (1.0 + 1.0j) * np.exp(-(grid.nodes**2)))
        with pytest.raises(ValueError, match="imaginary"):
            solve_constrained(dense_operator, "minus", bad, [dense_operator.q.q])

    def test_degenerate_constraints(self, dense_operator):
        grid = dense_operator.grid
        q = dense_operator.q.q
        rhs = Field(grid, np.exp(-(grid.nodes**2)) * grid.nodes)
        with pytest.raises(DegeneracyError):
            solve_constrained(
                dense_operator, "minus", rhs, [q, q], kernel_tol=1.0
            )
        zero = Field(grid, np.zeros(grid.n_points))
        with pytest.raises(DegeneracyError):
            solve_constrained(
                dense_operator, "minus", rhs, [zero], kernel_tol=1.0
            )

    def test_random_admissible_rhs_consistency(self, dense_operator):
        rng = np.random.default_rng(11)
        grid = dense_operator.grid
        for trial in range(20):
            block = "minus" if trial % 2 == 0 else "plus"
            kernel_values = (
                dense_operator.q.q.values.real
                if block == "minus"
                else derivative(dense_operator.q.q).values.real
            )
            k_hat = kernel_values / np.linalg.norm(kernel_values)
            raw = smooth_decaying_field(grid, rng, complex_valued=False)
            admissible = raw.values.real - (raw.values.real @ k_hat) * k_hat
            rhs = Field(grid, admissible)
            ortho = [Field(grid, k_hat)]
            x = solve_constrained(dense_operator, block, rhs, ortho)
            res = np.linalg.norm(
                dense_operator.apply_values(x.values.real, block) - admissible
            )
            assert res <= 1e-9 * np.linalg.norm(admissible)

    def test_dense_and_spectral_paths_agree(self, dense_operator, monkeypatch):
        lam_q = scaling_generator(dense_operator.q.q, guard=False)
        lam_q = Field(dense_operator.grid, lam_q.values.real)
        q = dense_operator.q.q
        x_dense = solve_constrained(
            dense_operator, "minus", lam_q, [q], kernel_tol=1e-3
        )
        monkeypatch.setattr(linearized, "DENSE_LIMIT", 0)
        x_spectral = solve_constrained(
            dense_operator, "minus", lam_q, [q], kernel_tol=1e-3
        )
        diff = np.linalg.norm(x_dense.values.real - x_spectral.values.real)
        assert diff <= 1e-9 * np.linalg.norm(x_dense.values.real)


class TestKernelElements:
    def test_parities(self, kernel):
        def asym_even(values):
            return np.abs(values - np.roll(values[::-1], 1)).max()

        def asym_odd(values):
            return np.abs(values + np.roll(values[::-1], 1)).max()

        s1 = kernel.s1.values.real
        g1 = kernel.g1.values.real
        rho1 = kernel.rho1.values.real
        assert asym_even(s1) <= 1e-8 * np.abs(s1).max()
        assert asym_even(rho1) <= 1e-8 * np.abs(rho1).max()
        assert asym_odd(g1) <= 1e-8 * np.abs(g1).max()

    def test_positivity_pairings(self, kernel):
        assert kernel.inner_products["lambda_q_s1"] > 0
        assert kernel.inner_products["grad_q_g1"] > 0

    def test_quadratic_forms_match_pairings(self, kernel):
        ip = kernel.inner_products
        assert abs(ip["l_minus_s1_s1"] - ip["lambda_q_s1"]) <= 1e-9 * abs(
            ip["lambda_q_s1"]
        )
        assert abs(ip["l_minus_g1_g1"] - ip["grad_q_g1"]) <= 1e-9 * abs(
            ip["grad_q_g1"]
        )
        assert ip["l_minus_s1_s1"] > 0
        assert ip["l_minus_g1_g1"] > 0

    def test_relation_residual_table(self, operator, kernel):
        table = kernel_relation_residuals(operator, kernel)
        assert set(table) == {
            "minus_q",
            "plus_grad_q",
            "plus_lambda_q",
            "minus_g1",
            "minus_s1",
            "plus_rho1",
        }
        assert table["minus_q"] <= 1e-8
        assert table["plus_grad_q"] <= 1e-8
        assert table["minus_g1"] <= 1e-9
        assert table["minus_s1"] <= 1e-7
        assert table["plus_rho1"] <= 1e-9
        # the Lambda Q relation carries the L^-1.5 seam defect at this box
        assert table["plus_lambda_q"] <= 6e-6


class TestSelfAdjointness:
    def test_blocks_self_adjoint(self, dense_operator):
        rng = np.random.default_rng(3)
        grid = dense_operator.grid
        for _ in range(5):
            f = smooth_decaying_field(grid, rng, complex_valued=False)
            g = smooth_decaying_field(grid, rng, complex_valued=False)
            for block in ("plus", "minus"):
                lhs = inner_r(apply(dense_operator, f, block), g)
                rhs = inner_r(f, apply(dense_operator, g, block))
                assert abs(lhs - rhs) <= 1e-9 * norm_l2(f) * norm_l2(g)


class TestCommutators:
    def test_scaling_gradient_commutator(self, dense_operator):
        rng = np.random.default_rng(7)
        grid = dense_operator.grid
        for _ in range(5):
            f = smooth_decaying_field(grid, rng)
            lhs = scaling_generator(derivative(f), guard=False)
            rhs = scaling_generator(f, guard=False)
            out = lhs.values - derivative(rhs).values + derivative(f).values
            assert np.linalg.norm(out) * np.sqrt(grid.dx) <= 1e-9 * sobolev_norm(f, 2)

    @staticmethod
    def _inv_i_apply(op, f):
        return Field(op.grid, -1j * apply_linearization(op, f).values)

    def test_gradient_commutator_identity(self, dense_operator):
        rng = np.random.default_rng(13)
        grid = dense_operator.grid
        q_sq = Field(grid, dense_operator.q.q.values.real ** 2)
        grad_q_sq = derivative(q_sq).values.real
        for _ in range(10):
            f = smooth_decaying_field(grid, rng)
            lhs = (
                self._inv_i_apply(dense_operator, derivative(f)).values
                - derivative(self._inv_i_apply(dense_operator, f)).values
            )
            rhs = -1j * grad_q_sq * f.values - 2j * grad_q_sq * f.values.real
            assert np.linalg.norm(lhs - rhs) <= 1e-7 * np.linalg.norm(rhs)

    def test_scaling_commutator_identity(self, dense_operator):
        rng = np.random.default_rng(17)
        grid = dense_operator.grid
        y = grid.nodes
        q_sq = Field(grid, dense_operator.q.q.values.real ** 2)
        y_grad_q_sq = y * derivative(q_sq).values.real
        for _ in range(10):
            f = smooth_decaying_field(grid, rng)
            lam_f = scaling_generator(f, guard=False)
            lhs = (
                self._inv_i_apply(dense_operator, lam_f).values
                - scaling_generator(
                    self._inv_i_apply(dense_operator, f), guard=False
                ).values
            )
            df = sqrt_laplacian(f).values
            rhs = -1j * (
                df + y_grad_q_sq * f.values + 2.0 * y_grad_q_sq * f.values.real
            )
            assert np.linalg.norm(lhs - rhs) <= 1e-7 * np.linalg.norm(rhs)


@pytest.fixture(scope="module")
def dense_directions(dense_operator):
    """Constraint fields on the spectrum grid.

    The small box carries an O(L^-3) seam component along each block
    kernel, so the solves loosen the admissibility bound; the results
    are direction data for projections, not certified kernel elements.
    """
    q = dense_operator.q.q
    grad_q = Field(dense_operator.grid, derivative(q).values.real)
    lam_q = Field(
        dense_operator.grid, scaling_generator(q, guard=False).values.real
    )
    s1 = solve_constrained(dense_operator, "minus", lam_q, [q], kernel_tol=1e-3)
    g1 = solve_constrained(dense_operator, "minus", grad_q, [q], kernel_tol=1e-3)
    rho1 = solve_constrained(dense_operator, "plus", s1, [grad_q], kernel_tol=1e-3)
    return q, grad_q, s1, g1, rho1


class TestCoercivity:

    def test_projected_form_positive(self, dense_operator, dense_directions):
        q, grad_q, s1, g1, rho1 = dense_directions
        i_rho1 = Field(dense_operator.grid, 1j * rho1.values.real)
        min_eig, kappa = coercivity_spectrum(
            dense_operator, [q, s1, g1, i_rho1]
        )
        assert min_eig > 0
        assert kappa > 0

    def test_unprojected_form_indefinite(self, dense_operator):
        min_eig, kappa = coercivity_spectrum(dense_operator, [])
        assert min_eig < 0
        assert kappa < 0

    def test_spectral_orthogonality_set_positive(self, dense_operator):
        lam, phi = ground_eigenpair(dense_operator)
        q = dense_operator.q.q
        grad_q = Field(dense_operator.grid, derivative(q).values.real)
        i_q = Field(dense_operator.grid, 1j * q.values.real)
        min_eig, kappa = coercivity_spectrum(dense_operator, [phi, grad_q, i_q])
        assert min_eig > 0
        assert kappa > 0

    def test_minus_block_nonnegative_off_kernel(self, dense_operator):
        q_hat = dense_operator.q.q.values.real
        q_hat = q_hat / np.linalg.norm(q_hat)
        weight = linearized._weight_matrix(dense_operator.grid)
        plain, weighted = linearized._projected_min_eig(
            dense_operator.l_minus, weight, [q_hat]
        )
        assert plain >= -1e-8
        assert weighted >= -1e-8

    def test_mixed_constraint_rejected(self, dense_operator):
        grid = dense_operator.grid
        mixed = Field(grid, (1.0 + 1.0j) * np.exp(-(grid.nodes**2)))
        with pytest.raises(ValueError, match="mixed"):
            coercivity_spectrum(dense_operator, [mixed])


class TestGroundEigenpair:
    def test_negative_simple_direction(self, dense_operator):
        lam, phi = ground_eigenpair(dense_operator)
        assert lam < 0
        assert phi.values.real.min() > 0
        assert abs(norm_l2(phi) - 1.0) <= 1e-12
        residual = dense_operator.apply_values(
            phi.values.real, "plus"
        ) - lam * phi.values.real
        assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(phi.values.real)

    def test_rayleigh_value_matches(self, dense_operator):
        lam, phi = ground_eigenpair(dense_operator)
        quad = inner_r(apply(dense_operator, phi, "plus"), phi)
        assert abs(quad - lam) <= 1e-9 * abs(lam)
