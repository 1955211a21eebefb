"""Linearization about the ground state, in real/imaginary block form.

For real Q the complex linearization of i u_t = Du - |u|^2 u splits into
two real self-adjoint blocks acting on the real and imaginary parts of a
perturbation f = f1 + i f2:

    plus block   B+ = D + 1 - 3 Q^2      (acts on f1)
    minus block  B- = D + 1 -   Q^2      (acts on f2)

and the full operator is  f -> B+ f1 + i B- f2.  Applications are spectral
at any resolution.  Dense symmetric matrix realizations exist on demand for
grids up to 2^13 points, which is where whole-spectrum work (coercivity
eigenvalues, the negative Rayleigh direction) happens; constrained solves
use a dense bordered system there and a projected, preconditioned MINRES
iteration on larger grids.  The two solve paths are cross-checked in the
test suite.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, circulant, eigh, null_space, solve
from scipy.sparse.linalg import LinearOperator, minres

from .errors import (
    DegeneracyError,
    DivergenceError,
    NumericsError,
    SolvabilityError,
    StaleGroundStateError,
)
from .grids import Field, derivative, inner_r, norm_l2, scaling_generator

DENSE_LIMIT = 8192

# relative kernel-column overlap below which a constraint direction is
# considered degenerate (zero or duplicated)
_RANK_TOL = 1e-12


class LinearizedOperator:
    """The two real blocks of the linearization, bound to one ground state.

    Attributes
    ----------
    q        : the GroundState the blocks were assembled from
    grid     : its grid
    l_plus   : dense symmetric realization of B+ (grids up to 2^13 only)
    l_minus  : dense symmetric realization of B-
    """

    __slots__ = ("q", "grid", "_q_sq", "_abs_xi_r", "_l_plus", "_l_minus")

    def __init__(self, ground_state):
        self.q = ground_state
        self.grid = ground_state.q.grid
        self._q_sq = ground_state.q.values.real ** 2
        self._abs_xi_r = np.abs(
            2.0 * np.pi * np.fft.rfftfreq(self.grid.n_points, d=self.grid.dx)
        )
        self._l_plus = None
        self._l_minus = None
        if self.grid.n_points <= DENSE_LIMIT:
            self._l_plus = self._dense_block(3.0)
            self._l_minus = self._dense_block(1.0)

    def _dense_block(self, cube_weight):
        n = self.grid.n_points
        symbol = np.abs(self.grid.freqs) + 1.0
        column = np.fft.ifft(symbol).real
        a = circulant(column)
        a[np.diag_indices(n)] -= cube_weight * self._q_sq
        return 0.5 * (a + a.T)

    @property
    def l_plus(self):
        if self._l_plus is None:
            raise RuntimeError(
                "dense realization is limited to %d points (grid has %d); "
                "use apply()/solve_constrained(), which stay spectral"
                % (DENSE_LIMIT, self.grid.n_points)
            )
        return self._l_plus

    @property
    def l_minus(self):
        if self._l_minus is None:
            raise RuntimeError(
                "dense realization is limited to %d points (grid has %d); "
                "use apply()/solve_constrained(), which stay spectral"
                % (DENSE_LIMIT, self.grid.n_points)
            )
        return self._l_minus

    # array-level actions, real input -> real output
    def apply_values(self, values, block):
        cube_weight = _cube_weight(block)
        lin = np.fft.irfft(
            (self._abs_xi_r + 1.0) * np.fft.rfft(values), n=self.grid.n_points
        )
        return lin - cube_weight * self._q_sq * values

    def precondition_values(self, values):
        """(D + 1)^{-1}, the free-resolvent preconditioner."""
        return np.fft.irfft(
            np.fft.rfft(values) / (self._abs_xi_r + 1.0), n=self.grid.n_points
        )


def _cube_weight(block):
    if block == "plus":
        return 3.0
    if block == "minus":
        return 1.0
    raise ValueError("block must be 'plus' or 'minus', got %r" % (block,))


def build(ground_state):
    """Assemble the linearization about a ground state.

    The defining-equation residual of Q is re-measured on the operator's
    grid: a profile imported from another grid or mass normalization fails
    here rather than poisoning every downstream solve.
    """
    op = LinearizedOperator(ground_state)
    q_values = ground_state.q.values.real
    stale = np.linalg.norm(op.apply_values(q_values, "minus")) / np.linalg.norm(
        q_values
    )
    if stale > 1e-6:
        raise StaleGroundStateError(
            "ground state violates its equation on this grid: "
            "relative minus-block kernel residual %.3e > 1e-6" % stale
        )
    return op


def apply(op, f, block):
    """Apply one real block to a field (componentwise on re/im)."""
    if f.grid != op.grid:
        raise ValueError("field grid %r does not match operator grid %r"
                         % (f.grid, op.grid))
    re = op.apply_values(f.values.real, block)
    im = op.apply_values(f.values.imag, block)
    return Field(op.grid, re + 1j * im)


def apply_linearization(op, f):
    """The full complex action  f -> B+ Re(f) + i B- Im(f)."""
    if f.grid != op.grid:
        raise ValueError("field grid %r does not match operator grid %r"
                         % (f.grid, op.grid))
    re = op.apply_values(f.values.real, "plus")
    im = op.apply_values(f.values.imag, "minus")
    return Field(op.grid, re + 1j * im)


def _block_kernel_values(op, block):
    """The symmetry direction annihilated by each block: Q or its gradient."""
    if block == "minus":
        return op.q.q.values.real
    return derivative(op.q.q).values.real


def _orthonormal_constraints(vectors, n):
    """Gram-Schmidt with degeneracy detection, plain dot products."""
    basis = []
    for v in vectors:
        w = v.astype(np.float64, copy=True)
        for b in basis:
            w -= (w @ b) * b
        norm = np.linalg.norm(w)
        if norm <= _RANK_TOL * max(np.linalg.norm(v), 1.0):
            raise DegeneracyError(
                "constraint set is rank deficient: a direction is zero or "
                "a duplicate after orthogonalization"
            )
        basis.append(w / norm)
    return basis


def _real_rhs_values(rhs):
    values = rhs.values
    im = np.linalg.norm(values.imag)
    re = np.linalg.norm(values.real)
    if im > 1e-12 * max(re, 1e-300):
        raise ValueError(
            "block solves act on real data; rhs has relative imaginary "
            "content %.3e" % (im / max(re, 1e-300))
        )
    return values.real.copy()


def solve_constrained(op, block, rhs, orthogonal_to, kernel_tol=1e-8):
    """Invert one block on the orthogonal complement of its kernel.

    The solvability of  B x = rhs  requires rhs to have no component along
    the block's kernel direction; the solve then returns the unique x
    orthogonal to every direction in `orthogonal_to` (normally the kernel
    itself, which fixes the inversion's one-dimensional ambiguity).

    `kernel_tol` bounds the tolerated relative kernel component (default
    1e-8, the contract value).  On deliberately small boxes the x-weighted
    seam defect puts an O(L^-3) kernel component into otherwise exact
    right-hand sides; callers producing merely directional data (e.g.
    constraint vectors for spectrum work) may loosen the bound explicitly.
    The kernel component is always projected out before solving.

    Dense grids solve the bordered system [[B, C], [C^T, 0]]; large grids
    run MINRES on the rank-one-shifted operator B + sum k k^T with a
    (D+1)^{-1} preconditioner, which converges in ~15 iterations.
    """
    if rhs.grid != op.grid:
        raise ValueError("rhs grid %r does not match operator grid %r"
                         % (rhs.grid, op.grid))
    b = _real_rhs_values(rhs)
    rhs_norm = np.linalg.norm(b)
    if rhs_norm == 0.0:
        return Field(op.grid, np.zeros(op.grid.n_points))

    kernel_hat = _block_kernel_values(op, block)
    kernel_hat = kernel_hat / np.linalg.norm(kernel_hat)
    sqrt_dx = np.sqrt(op.grid.dx)
    overlap = float(sqrt_dx * (b @ kernel_hat))
    if abs(overlap) > kernel_tol * sqrt_dx * rhs_norm:
        raise SolvabilityError(
            "rhs has component %.3e along the %s-block kernel "
            "(limit %.1e relative)"
            % (abs(overlap) / (sqrt_dx * rhs_norm), block, kernel_tol),
            inner_product=overlap,
            label="%s-block kernel" % block,
        )

    constraints = _orthonormal_constraints(
        [np.asarray(v.values.real, dtype=np.float64) for v in orthogonal_to],
        op.grid.n_points,
    )

    b_solvable = b - (b @ kernel_hat) * kernel_hat

    if op.grid.n_points <= DENSE_LIMIT:
        x = _solve_dense(op, block, b_solvable, constraints)
    else:
        x = _solve_spectral(op, block, b_solvable, constraints, kernel_hat)

    for c in constraints:
        x -= (x @ c) * c

    residual = np.linalg.norm(op.apply_values(x, block) - b_solvable)
    if residual > 1e-9 * rhs_norm:
        raise DivergenceError(
            "constrained solve residual %.3e relative exceeds 1e-9"
            % (residual / rhs_norm),
            residual=residual,
        )
    return Field(op.grid, x)


def _solve_dense(op, block, b, constraints):
    a = op.l_plus if block == "plus" else op.l_minus
    n = a.shape[0]
    m = len(constraints)
    if m == 0:
        try:
            return solve(a, b, assume_a="sym")
        except LinAlgError as exc:
            raise DegeneracyError("unconstrained block solve is singular") from exc
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = a
    for j, c in enumerate(constraints):
        kkt[:n, n + j] = c
        kkt[n + j, :n] = c
    full_rhs = np.concatenate([b, np.zeros(m)])
    try:
        sol = solve(kkt, full_rhs, assume_a="sym")
    except LinAlgError as exc:
        raise DegeneracyError("bordered system is singular") from exc
    return sol[:n]


def _solve_spectral(op, block, b, constraints, kernel_hat):
    # the shift directions must span the kernel line, otherwise the shifted
    # operator stays singular and the solution would not be well defined
    for c in constraints:
        if abs(c @ kernel_hat) < 0.99:
            raise ValueError(
                "spectral-path constraints must span the block kernel; "
                "got a direction with kernel overlap %.3f" % abs(c @ kernel_hat)
            )
    if not constraints:
        raise DegeneracyError(
            "spectral solve of a singular block needs the kernel direction "
            "in orthogonal_to"
        )
    n = op.grid.n_points

    def matvec(v):
        out = op.apply_values(v, block)
        for c in constraints:
            out = out + (v @ c) * c
        return out

    shifted = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    preco = LinearOperator(
        (n, n), matvec=op.precondition_values, dtype=np.float64
    )
    x, info = minres(shifted, b, rtol=1e-13, maxiter=400, M=preco)
    if info != 0:
        raise DegeneracyError(
            "MINRES failed to converge (info=%d); shifted block may be "
            "singular or indefinite beyond the rank-one repair" % info
        )
    return x


@dataclass(frozen=True)
class KernelElements:
    """Generalized-kernel directions of the linearization.

    s1 solves  B- s1 = Lambda Q,  rho1 solves  B+ rho1 = s1,  and g1 solves
    B- g1 = +grad Q.  The g1 sign is a normalization choice: it makes the
    momentum pairing (grad Q, g1) positive, which is the convention every
    derived constant here uses; the corrector hierarchy consumes -g1 where
    its expansion wants the opposite orientation, and all quadratic
    functionals of g1 are unchanged by the flip.
    """

    s1: Field
    g1: Field
    rho1: Field
    lambda_q: Field
    inner_products: dict


def kernel_elements(op):
    """Solve for S1, G1, rho1 and tabulate the paired constants."""
    q = op.q.q
    grad_q = derivative(q)
    grad_q = Field(op.grid, grad_q.values.real)
    # Lambda Q decays only quadratically, so at working box sizes its edge
    # values sit near the x-weight guard threshold; the seam contribution
    # is part of the measured torus defect, not a usage error.
    lambda_q = scaling_generator(q, guard=False)
    lambda_q = Field(op.grid, lambda_q.values.real)

    s1 = solve_constrained(op, "minus", lambda_q, [q])
    g1 = solve_constrained(op, "minus", grad_q, [q])
    rho1 = solve_constrained(op, "plus", s1, [grad_q])

    l_minus_s1 = apply(op, s1, "minus")
    l_minus_g1 = apply(op, g1, "minus")

    inner_products = {
        "lambda_q_s1": inner_r(lambda_q, s1),
        "grad_q_g1": inner_r(grad_q, g1),
        "q_rho1": inner_r(q, rho1),
        "s1_norm_sq": norm_l2(s1) ** 2,
        "g1_norm_sq": norm_l2(g1) ** 2,
        "rho1_norm_sq": norm_l2(rho1) ** 2,
        "l_minus_s1_s1": inner_r(l_minus_s1, s1),
        "l_minus_g1_g1": inner_r(l_minus_g1, g1),
        "q_norm_sq": norm_l2(q) ** 2,
        "lambda_q_norm_sq": norm_l2(lambda_q) ** 2,
        "grad_q_norm_sq": norm_l2(grad_q) ** 2,
    }
    return KernelElements(
        s1=s1, g1=g1, rho1=rho1, lambda_q=lambda_q, inner_products=inner_products
    )


def kernel_relation_residuals(op, ke=None):
    """Relative residuals of the six structural relations.

    Keys name the block and the field the relation constrains.  All are
    measured with plain spectral applications on the operator's grid, so
    they inherit the grid's aliasing and seam defects; the values converge
    to zero under refinement at measured rates (see package docs).
    """
    if ke is None:
        ke = kernel_elements(op)
    q = op.q.q
    grad_q = derivative(q)
    lam_q = ke.lambda_q

    def rel(block, f, target, scale):
        out = apply(op, f, block).values.real - target
        return float(np.linalg.norm(out) / np.linalg.norm(scale))

    qv = q.values.real
    return {
        "minus_q": rel("minus", q, 0.0, qv),
        "plus_grad_q": rel("plus", grad_q, 0.0, grad_q.values.real),
        "plus_lambda_q": rel("plus", lam_q, -qv, qv),
        "minus_g1": rel("minus", ke.g1, grad_q.values.real, grad_q.values.real),
        "minus_s1": rel("minus", ke.s1, lam_q.values.real, lam_q.values.real),
        "plus_rho1": rel("plus", ke.rho1, ke.s1.values.real, ke.s1.values.real),
    }


def _split_block_constraint(v):
    re = np.linalg.norm(v.values.real)
    im = np.linalg.norm(v.values.imag)
    if im <= 1e-12 * max(re, 1e-300):
        return "plus", v.values.real
    if re <= 1e-12 * max(im, 1e-300):
        return "minus", v.values.imag
    raise ValueError(
        "coercivity constraints must be purely real (plus block) or purely "
        "imaginary (minus block); got a mixed field"
    )


def _weight_matrix(grid):
    w = np.sqrt(1.0 + grid.freqs**2)
    column = np.fft.ifft(w).real
    mat = circulant(column)
    return 0.5 * (mat + mat.T)


def _projected_min_eig(a, b_metric, constraints):
    n = a.shape[0]
    if constraints:
        v = np.stack(constraints, axis=1)
        z = null_space(v.T)
    else:
        z = np.eye(n)
    pa = z.T @ a @ z
    asym = np.linalg.norm(pa - pa.T) / max(np.linalg.norm(pa), 1e-300)
    if asym > 1e-10:
        raise NumericsError(
            "projected quadratic form asymmetric at %.3e relative" % asym
        )
    pa = 0.5 * (pa + pa.T)
    pb = z.T @ b_metric @ z
    pb = 0.5 * (pb + pb.T)
    plain = eigh(pa, eigvals_only=True, subset_by_index=[0, 0])[0]
    weighted = eigh(pa, pb, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(plain), float(weighted)


def coercivity_spectrum(op, orthogonality_set):
    """Smallest eigenvalue of the linearization on a constrained subspace.

    Each constraint field lives in exactly one block (real fields pin the
    plus block, purely imaginary fields the minus block), so the blockwise
    form never couples and the spectrum is the union of two independent
    projected problems.  Returns (min_eigenvalue, kappa_estimate): the
    first is the plain L2 minimum of the projected form, the second the
    minimum against the H^{1/2} metric (1+xi^2)^{1/2} — the quantity that
    plays the coercivity constant.
    """
    blocks = {"plus": [], "minus": []}
    for v in orthogonality_set:
        name, values = _split_block_constraint(v)
        blocks[name].append(values / np.linalg.norm(values))
    b_metric = _weight_matrix(op.grid)
    plain_p, weighted_p = _projected_min_eig(op.l_plus, b_metric, blocks["plus"])
    plain_m, weighted_m = _projected_min_eig(op.l_minus, b_metric, blocks["minus"])
    return min(plain_p, plain_m), min(weighted_p, weighted_m)


def ground_eigenpair(op):
    """Lowest eigenpair of the plus block (its unique negative direction).

    The minimizer of the unprojected Rayleigh quotient; the eigenvalue is
    negative and the eigenfunction is positive and even, normalized to
    unit L2 mass with a positive center value.
    """
    vals, vecs = eigh(op.l_plus, subset_by_index=[0, 0])
    lam = float(vals[0])
    phi = vecs[:, 0]
    center = op.grid.n_points // 2
    if phi[center] < 0:
        phi = -phi
    phi = phi / (np.linalg.norm(phi) * np.sqrt(op.grid.dx))
    return lam, Field(op.grid, phi)
