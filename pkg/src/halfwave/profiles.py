"""Fifth-order corrector hierarchy and the modified blow-up profile.

The profile Q_P(b, nu, eta) = Q + sum (ib)^p (i nu)^q eta^r R_{p,q,r} over
1 <= p + 2q + 2r <= 5 absorbs the slow modulation of scale (b), velocity
(nu), and the unstable energy direction (eta) into stationary correctors.
Each corrector solves one block equation whose right-hand side is built
from lower orders; four scalar constants c1..c4 are fixed so that the
order-5 solvability conditions hold identically.

Conventions that matter for reproducibility:

  * every cubic monomial on a right-hand side is evaluated pointwise and
    then 2/3-truncated once (never between factors); linear terms and the
    Q^2 potentials inside the operator stay raw.  The profile-error
    evaluation applies the same single truncation to its complete cubic
    term, which is what makes the order-by-order cancellation telescope to
    solver precision;
  * the discrete box puts a small spurious kernel component into a few
    right-hand sides (the continuum value is exactly zero); it is measured,
    recorded, gated, and projected out before solving;
  * minus-block correctors are normalized orthogonal to Q, plus-block
    correctors orthogonal to grad Q.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatchError, InconsistencyError, SolvabilityError
from .fileio import load_field, save_field
from .grids import (
    Field,
    conserved_quantities,
    dealias_values,
    derivative,
    inner_r,
    norm_l2,
    sobolev_norm,
)
from .linearized import kernel_elements, solve_constrained

PROFILE_FORMAT = "halfwave-profiles-v1"

# build order: strictly increasing k = p + 2q + 2r, constants interleaved
# where first needed
ORDERS = (
    (1, 0, 0),
    (0, 1, 0),
    (2, 0, 0),
    (0, 0, 1),
    (3, 0, 0),
    (1, 1, 0),
    (1, 0, 1),
    (4, 0, 0),
    (2, 1, 0),
    (2, 0, 1),
    (0, 2, 0),
    (0, 1, 1),
    (0, 0, 2),
    (5, 0, 0),
    (3, 1, 0),
    (3, 0, 1),
    (1, 2, 0),
    (1, 0, 2),
    (1, 1, 1),
)

# orders whose solvability the expansion does not get to impose: the
# structure must deliver them for free
MEASURED_ORDERS = {(1, 0, 2), (1, 1, 1)}

_IMPOSED_LIMIT = 1e-6
_MEASURED_LIMIT = 1e-5
_MEASURED_FLAG = 1e-7


def block_for_order(order):
    """Block parity rule: odd p+q lands in the minus block."""
    p, q, _ = order
    return "minus" if (p + q) % 2 == 1 else "plus"


def _parity_project(values, order):
    """Project onto the order's spatial parity: even exactly when q is even.

    The block operators and every right-hand-side recipe preserve parity,
    so each corrector's parity is forced; projecting the assembled side
    (and the returned solve) keeps per-level roundoff in the opposite
    parity from compounding through the hierarchy.  Reflection is the
    lattice permutation j -> N - j, so the projection is exact.
    """
    reflected = np.roll(values[::-1], 1)
    if order[1] % 2 == 0:
        return 0.5 * (values + reflected)
    return 0.5 * (values - reflected)


@dataclass(frozen=True)
class ProfileSet:
    """All correctors of order k <= 5 with their expansion constants.

    correctors maps (p, q, r) to a real Field; identity_residuals holds the
    named solvability inner products and cross-identity defects measured
    during the build, plus the two quadratic-form constants that downstream
    expansions (energy, momentum) are written in.
    """

    correctors: dict
    c1: float
    c2: float
    c3: float
    c4: float
    identity_residuals: dict

    @property
    def grid(self):
        return self.correctors[(1, 0, 0)].grid


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


class _ScalingGenerator:
    """Torus realization of the scaling generator 1/2 + y d/dy.

    Repeated application inside the hierarchy is only stable with two
    guards on the x-weighted term:

    * the x-weight fades to zero at the box seam (quintic smoothstep
      over the outer 70% of the half-box).  The box coordinate jumps by
      -length at the seam, so an unfaded weight turns the seam
      curvature of any slowly decaying even field into a kink, and each
      level of the hierarchy amplifies that kink by a factor of order
      length.  The fade must be gentle: weight-times-gradient contracts
      only on structure that varies on the scale of the box.

    * each dyadic shell of the weighted flux w(y) f'(y) is low-passed,
      keeping local frequencies up to roughly 48/|y| at position y and
      leaving |y| below 128 untouched.  The operator w d/dy has gain
      w(y) xi on frequency xi while a level solve damps it only by
      1/(1 + xi), so each level multiplies fixed-frequency content by
      up to max(w), about a fifth of the box length: rounding noise
      alone compounds to visible size after four levels on large
      boxes, and the seam jump of any odd 1/y tail rings broadband
      through the spectral derivative and compounds the same way.  The
      shell cap bounds the per-level gain by about the inner radius,
      independent of the box, while the surviving band still holds
      everything an algebraically decaying tail puts there (local
      frequency about 2/|y|, a factor 20 below the cap, and the
      eighth-power rolloff leaves pairings against core-localized
      fields intact to better than 1e-10).  Two composition rules
      matter: the shell hats must be smooth in log-radius (quintic
      smoothstep; wider hats drag a shell's filter into its inner
      neighbors where the content is hotter), and masking must happen
      before filtering, since a filter applied to the whole flux
      smears the core's content across the box for the masks to pick
      up.  Each low-pass has unit response at zero frequency, so the
      flux integral is conserved exactly.

    Fields with genuine oscillation at |y| > 128 do not belong under
    this operator; the hierarchy's fields are tails out there.
    """

    _INNER = 128.0  # no filtering inside this radius
    _KEEP = 96.0  # keep local frequencies up to about _KEEP/(2|y|)

    def __init__(self, grid):
        self.grid = grid
        half = 0.5 * grid.length
        fade = _smoothstep((np.abs(grid.nodes) / half - 0.3) / 0.7)
        self.weight = grid.nodes * (1.0 - fade)
        levels = max(1, int(np.ceil(np.log2(max(half / self._INNER, 2.0)))))
        radius = np.maximum(np.abs(grid.nodes), 0.5 * self._INNER)
        m = np.clip(np.log2(radius / self._INNER), 0.0, float(levels))
        self.masks = [
            _smoothstep(1.0 - np.abs(m - j)) for j in range(levels + 1)
        ]
        self.lowpass = [
            np.exp(-((grid.freqs * (self._INNER * 2.0**j / self._KEEP)) ** 8))
            for j in range(1, levels + 1)
        ]

    def __call__(self, values):
        grad = derivative(Field(self.grid, values)).values
        complex_in = np.iscomplexobj(values)
        if not complex_in:
            grad = grad.real
        flux = self.weight * grad
        clean = self.masks[0] * flux
        for mask, keep in zip(self.masks[1:], self.lowpass):
            clean = clean + np.fft.ifft(np.fft.fft(mask * flux) * keep)
        if not complex_in:
            clean = clean.real
        return 0.5 * values + clean


_GENERATORS = {}


def _scaling_generator(grid):
    gen = _GENERATORS.get(grid)
    if gen is None:
        gen = _GENERATORS[grid] = _ScalingGenerator(grid)
    return gen


class _Workspace:
    """Array-level scratch state shared by the hierarchy assembly."""

    def __init__(self, op, kernel):
        self.op = op
        self.grid = op.grid
        self.q = op.q.q.values.real
        self.grad_q = derivative(op.q.q).values.real
        self.gen = _scaling_generator(op.grid)
        # the hierarchy's own generator applied to Q, not the kernel
        # element's raw-weight version: every identity below must use
        # one generator consistently
        self.lam_q = self.lam(self.q)
        self.r = {}

    def lam(self, values):
        return self.gen(values)

    def grad(self, values):
        return derivative(Field(self.grid, values)).values.real

    def cubic(self, values):
        return dealias_values(self.grid, values)


def _rhs_for_order(ws, order, c1=None, c2=None, c3=None, c4=None):
    """Assemble the right-hand side of one corrector equation.

    Returns the real array  linear + dealias(cubic)  exactly as the
    expansion's order-(p,q,r) bookkeeping produces it.  Constants are
    accepted explicitly so the order-5 solvability diagnostics can re-run
    the assembly at shifted constant values.
    """
    r = ws.r
    q = ws.q
    if order == (1, 0, 0):
        return ws.lam(q)
    if order == (0, 1, 0):
        return -ws.grad_q
    if order == (2, 0, 0):
        a = r[(1, 0, 0)]
        return -0.5 * a + ws.lam(a) + ws.cubic(-(a**2) * q)
    if order == (0, 0, 1):
        return r[(1, 0, 0)].copy()
    if order == (3, 0, 0):
        a, b2 = r[(1, 0, 0)], r[(2, 0, 0)]
        return -b2 + ws.lam(b2) + ws.cubic(2.0 * b2 * a * q - a**3)
    if order == (1, 1, 0):
        a, v = r[(1, 0, 0)], r[(0, 1, 0)]
        return -v + ws.lam(v) - ws.grad(a) + ws.cubic(-2.0 * a * v * q)
    if order == (1, 0, 1):
        a, b2, e = r[(1, 0, 0)], r[(2, 0, 0)], r[(0, 0, 1)]
        return 2.0 * b2 + ws.lam(e) + ws.cubic(2.0 * e * a * q)
    if order == (4, 0, 0):
        a, b2, b3 = r[(1, 0, 0)], r[(2, 0, 0)], r[(3, 0, 0)]
        cubic = 3.0 * b2**2 * q - 2.0 * b3 * a * q - b2 * a**2
        return c1 * a - 1.5 * b3 + ws.lam(b3) + ws.cubic(cubic)
    if order == (2, 1, 0):
        a, v, b2, bv = r[(1, 0, 0)], r[(0, 1, 0)], r[(2, 0, 0)], r[(1, 1, 0)]
        cubic = 2.0 * bv * a * q + 2.0 * b2 * v * q - 3.0 * v * a**2
        return c2 * ws.grad_q - 1.5 * bv + ws.lam(bv) - ws.grad(b2) + ws.cubic(cubic)
    if order == (2, 0, 1):
        a, b3, be, e = r[(1, 0, 0)], r[(3, 0, 0)], r[(1, 0, 1)], r[(0, 0, 1)]
        b2 = r[(2, 0, 0)]
        cubic = 6.0 * b2 * e * q - 2.0 * be * a * q - e * a**2
        return -c3 * a + 3.0 * b3 - 0.5 * be + ws.lam(be) + ws.cubic(cubic)
    if order == (0, 2, 0):
        a, v = r[(1, 0, 0)], r[(0, 1, 0)]
        return -c4 * a - ws.grad(v) + ws.cubic(-(v**2) * q)
    if order == (0, 1, 1):
        v, e, bv = r[(0, 1, 0)], r[(0, 0, 1)], r[(1, 1, 0)]
        return bv - ws.grad(e) + ws.cubic(2.0 * v * e * q)
    if order == (0, 0, 2):
        e, be = r[(0, 0, 1)], r[(1, 0, 1)]
        return be + ws.cubic(3.0 * e**2 * q)
    if order == (5, 0, 0):
        a, b2, b3 = r[(1, 0, 0)], r[(2, 0, 0)], r[(3, 0, 0)]
        b4 = r[(4, 0, 0)]
        cubic = 2.0 * b4 * a * q + 2.0 * b3 * b2 * q - 3.0 * b3 * a**2 + b2**2 * a
        return 2.0 * c1 * b2 - 2.0 * b4 + ws.lam(b4) + ws.cubic(cubic)
    if order == (3, 1, 0):
        a, v, b2, b3 = r[(1, 0, 0)], r[(0, 1, 0)], r[(2, 0, 0)], r[(3, 0, 0)]
        bv, b2v = r[(1, 1, 0)], r[(2, 1, 0)]
        cubic = (
            -2.0 * b2v * a * q
            - 2.0 * b3 * v * q
            - 2.0 * b2 * v * a
            + 6.0 * bv * b2 * q
            - bv * a**2
        )
        return (
            c2 * ws.grad(a) - 2.0 * b2v + ws.lam(b2v) - ws.grad(b3) + ws.cubic(cubic)
        )
    if order == (3, 0, 1):
        a, b2, b3, b4 = r[(1, 0, 0)], r[(2, 0, 0)], r[(3, 0, 0)], r[(4, 0, 0)]
        be, b2e, e = r[(1, 0, 1)], r[(2, 0, 1)], r[(0, 0, 1)]
        cubic = (
            2.0 * b2e * a * q
            + 2.0 * be * b2 * q
            - 3.0 * be * a**2
            + 2.0 * b3 * e * q
            + 2.0 * b2 * e * a
        )
        return -2.0 * c3 * b2 + 4.0 * b4 - b2e + ws.lam(b2e) + ws.cubic(cubic)
    if order == (1, 2, 0):
        a, v, b2 = r[(1, 0, 0)], r[(0, 1, 0)], r[(2, 0, 0)]
        bv, v2 = r[(1, 1, 0)], r[(0, 2, 0)]
        cubic = 2.0 * v2 * a * q + 2.0 * bv * v * q - 3.0 * v**2 * a
        return (
            -2.0 * c4 * b2 - ws.grad(bv) - 2.0 * v2 + ws.lam(v2) + ws.cubic(cubic)
        )
    if order == (1, 0, 2):
        a, e, be = r[(1, 0, 0)], r[(0, 0, 1)], r[(1, 0, 1)]
        b2e, e2 = r[(2, 0, 1)], r[(0, 0, 2)]
        cubic = 2.0 * e2 * a * q + 2.0 * be * e * q + e**2 * a
        return 2.0 * b2e + ws.lam(e2) + ws.cubic(cubic)
    if order == (1, 1, 1):
        a, v, e = r[(1, 0, 0)], r[(0, 1, 0)], r[(0, 0, 1)]
        bv, be, b2v, ve = (
            r[(1, 1, 0)],
            r[(1, 0, 1)],
            r[(2, 1, 0)],
            r[(0, 1, 1)],
        )
        cubic = (
            6.0 * bv * e * q - 2.0 * a * ve * q - 2.0 * be * v * q - 2.0 * a * v * e
        )
        return 2.0 * b2v - ve + ws.lam(ve) - ws.grad(be) + ws.cubic(cubic)
    raise KeyError("unknown corrector order %r" % (order,))


def _constant_c1(ws, pairing):
    a, b2, b3 = ws.r[(1, 0, 0)], ws.r[(2, 0, 0)], ws.r[(3, 0, 0)]
    q = ws.q
    a_b4 = (
        -1.5 * b3
        + ws.lam(b3)
        + ws.cubic(3.0 * b2**2 * q - 2.0 * b3 * a * q - b2 * a**2)
    )
    nl_b5 = ws.cubic(2.0 * b3 * b2 * q - 3.0 * b3 * a**2 + b2**2 * a)
    num = pairing(a_b4, a - 2.0 * ws.lam_q) - pairing(nl_b5, q)
    return num / (2.0 * pairing(ws.lam_q, a))


def _constant_c2(ws, pairing):
    a, v, b2, b3 = (
        ws.r[(1, 0, 0)],
        ws.r[(0, 1, 0)],
        ws.r[(2, 0, 0)],
        ws.r[(3, 0, 0)],
    )
    bv = ws.r[(1, 1, 0)]
    q = ws.q
    a_b2v = (
        -1.5 * bv
        + ws.lam(bv)
        - ws.grad(b2)
        + ws.cubic(2.0 * bv * a * q + 2.0 * b2 * v * q - 3.0 * v * a**2)
    )
    nl_b3v = ws.cubic(
        -2.0 * b3 * v * q - 2.0 * b2 * v * a + 6.0 * bv * b2 * q - bv * a**2
    )
    num = pairing(a_b2v, ws.grad(a) - v) + pairing(ws.grad(b3) - nl_b3v, ws.grad_q)
    return -num / pairing(-ws.grad_q, v)


def _constant_c3(ws, pairing):
    a, b2, b3, b4 = (
        ws.r[(1, 0, 0)],
        ws.r[(2, 0, 0)],
        ws.r[(3, 0, 0)],
        ws.r[(4, 0, 0)],
    )
    be, e = ws.r[(1, 0, 1)], ws.r[(0, 0, 1)]
    q = ws.q
    a_b2e = (
        3.0 * b3
        - 0.5 * be
        + ws.lam(be)
        + ws.cubic(6.0 * b2 * e * q - 2.0 * be * a * q - e * a**2)
    )
    nl_b3e = ws.cubic(
        2.0 * be * b2 * q - 3.0 * be * a**2 + 2.0 * b3 * e * q + 2.0 * b2 * e * a
    )
    num = -pairing(a_b2e, a - ws.lam_q) + pairing(4.0 * b4 + nl_b3e, q)
    return num / pairing(ws.lam_q, a)


def _constant_c4(ws, pairing):
    a, v, bv = ws.r[(1, 0, 0)], ws.r[(0, 1, 0)], ws.r[(1, 1, 0)]
    q = ws.q
    a_v2 = -ws.grad(v) + ws.cubic(-(v**2) * q)
    nl_bv2 = ws.cubic(2.0 * bv * v * q - 3.0 * v**2 * a)
    num = pairing(a_v2, 2.0 * ws.lam_q - a) - pairing(ws.grad(bv) - nl_bv2, q)
    return num / (2.0 * pairing(ws.lam_q, a))


def build_profiles(op, kernel=None):
    """Construct all 19 correctors and the constants c1..c4.

    Orders are solved in increasing k; the four constants come from their
    closed-form pairing formulas, and the order-5 solvability conditions
    they were derived from are then re-measured as an independent
    consistency check (the assembly is affine in each constant, so the
    implied root is exact).  Solvability inner products that the
    construction imposes must vanish to 1e-6 relative; the two that the
    construction merely inherits are gated at 1e-5 and recorded.
    """
    if kernel is None:
        kernel = kernel_elements(op)
    ws = _Workspace(op, kernel)
    grid = op.grid
    dx = grid.dx

    def pairing(u, v):
        return float(dx * np.dot(u, v))

    residuals = {}
    q_field = op.q.q
    grad_q_field = Field(grid, ws.grad_q)
    kernel_field = {"minus": q_field, "plus": grad_q_field}
    kernel_unit = {
        "minus": ws.q / (np.linalg.norm(ws.q) * np.sqrt(dx)),
        "plus": ws.grad_q / (np.linalg.norm(ws.grad_q) * np.sqrt(dx)),
    }

    constants = {}

    def record_seed(order):
        block = block_for_order(order)
        rhs = _rhs_for_order(ws, order)
        key = "order_%d%d%d" % order
        clean = _parity_project(rhs, order)
        residuals["parity_" + key] = float(
            np.linalg.norm(rhs - clean) / np.linalg.norm(rhs)
        )
        rhs = clean
        rhs_norm = float(np.sqrt(dx) * np.linalg.norm(rhs))
        overlap = pairing(rhs, kernel_unit[block])
        residuals["overlap_" + key] = abs(overlap) / rhs_norm
        projected = rhs - (rhs @ kernel_unit[block]) * kernel_unit[block] * dx
        defect = np.linalg.norm(
            op.apply_values(ws.r[order], block) - projected
        ) / np.linalg.norm(rhs)
        residuals["defining_" + key] = float(defect)

    def solve_order(order):
        block = block_for_order(order)
        rhs = _rhs_for_order(
            ws,
            order,
            c1=constants.get("c1"),
            c2=constants.get("c2"),
            c3=constants.get("c3"),
            c4=constants.get("c4"),
        )
        key = "order_%d%d%d" % order
        clean = _parity_project(rhs, order)
        residuals["parity_" + key] = float(
            np.linalg.norm(rhs - clean) / np.linalg.norm(rhs)
        )
        rhs = clean
        rhs_norm = float(np.sqrt(dx) * np.linalg.norm(rhs))
        overlap = pairing(rhs, kernel_unit[block])
        overlap_rel = abs(overlap) / rhs_norm
        residuals["overlap_" + key] = overlap_rel
        if order in MEASURED_ORDERS:
            if overlap_rel > _MEASURED_LIMIT:
                raise InconsistencyError(
                    "measured solvability inner product at order %r is %.3e "
                    "relative (limit %.0e); the kernel normalization has "
                    "drifted" % (order, overlap_rel, _MEASURED_LIMIT)
                )
            if overlap_rel > _MEASURED_FLAG:
                warnings.warn(
                    "measured solvability inner product at order %r is %.3e "
                    "relative; projecting and continuing" % (order, overlap_rel),
                    RuntimeWarning,
                    stacklevel=3,
                )
        elif overlap_rel > _IMPOSED_LIMIT:
            raise SolvabilityError(
                "solvability violated at order %r: relative kernel inner "
                "product %.3e exceeds %.0e" % (order, overlap_rel, _IMPOSED_LIMIT),
                inner_product=overlap,
                label="order %d%d%d" % order,
            )
        x = solve_constrained(
            op, block, Field(grid, rhs), [kernel_field[block]], kernel_tol=2e-5
        )
        values = _parity_project(x.values.real, order)
        projected = rhs - (rhs @ kernel_unit[block]) * kernel_unit[block] * dx
        defect = np.linalg.norm(
            op.apply_values(values, block) - projected
        ) / np.linalg.norm(rhs)
        residuals["defining_" + key] = float(defect)
        ws.r[order] = values

    # the translation corrector coincides with the generalized-kernel
    # element already solved (orientation flip): its equation has no
    # x-weight.  The scaling pair is re-solved against the hierarchy's
    # own faded weight so the order-by-order cancellation is exact.
    solve_order((1, 0, 0))
    ws.r[(0, 1, 0)] = _parity_project(-kernel.g1.values.real, (0, 1, 0))
    record_seed((0, 1, 0))
    solve_order((0, 0, 1))

    for order in ((2, 0, 0), (3, 0, 0), (1, 1, 0), (1, 0, 1)):
        solve_order(order)

    constants["c1"] = _constant_c1(ws, pairing)
    solve_order((4, 0, 0))
    constants["c2"] = _constant_c2(ws, pairing)
    solve_order((2, 1, 0))
    constants["c3"] = _constant_c3(ws, pairing)
    solve_order((2, 0, 1))
    constants["c4"] = _constant_c4(ws, pairing)
    for order in ((0, 2, 0), (0, 1, 1), (0, 0, 2)):
        solve_order(order)
    for order in ((5, 0, 0), (3, 1, 0), (3, 0, 1), (1, 2, 0), (1, 0, 2), (1, 1, 1)):
        solve_order(order)

    if constants["c4"] >= 0.0:
        raise InconsistencyError(
            "c4 = %.6e must be negative; the minus-block pairings have the "
            "wrong orientation" % constants["c4"]
        )

    ip = kernel.inner_products
    residuals["l_minus_s1_s1"] = ip["l_minus_s1_s1"]
    residuals["l_minus_g1_g1"] = ip["l_minus_g1_g1"]
    residuals.update(_cross_identities(ws, kernel, constants, pairing))
    residuals.update(_solvability_roots(ws, kernel_unit, constants, pairing, dx))

    correctors = {
        order: Field(grid, ws.r[order].astype(np.complex128)) for order in ORDERS
    }
    return ProfileSet(
        correctors=correctors,
        c1=constants["c1"],
        c2=constants["c2"],
        c3=constants["c3"],
        c4=constants["c4"],
        identity_residuals=residuals,
    )


def _cross_identities(ws, kernel, constants, pairing):
    """Pairing identities that hold independently of how the solves ran."""
    r = ws.r
    q = ws.q
    ip = kernel.inner_products

    s1_sq = pairing(r[(1, 0, 0)], r[(1, 0, 0)])
    out = {
        "id_s1_r200": (s1_sq - 2.0 * pairing(q, r[(2, 0, 0)])) / s1_sq,
        "id_q_rho1": (ip["q_rho1"] + ip["lambda_q_s1"]) / abs(ip["lambda_q_s1"]),
    }

    # the two right-hand pairings are O(0.16) and cancel to 1e-3, so the
    # residual is scaled by the terms themselves, not by the remainder:
    # the remainder inherits the (1,0,1) solve's kernel projection at
    # first order and would drown in it otherwise
    lhs = pairing(r[(2, 1, 0)], ws.grad_q)
    u1 = pairing(ws.grad(r[(2, 0, 0)]), r[(0, 1, 0)])
    u2 = pairing(ws.grad(r[(1, 1, 0)]), r[(1, 0, 0)])
    out["id_r210_gradq"] = (lhs + u1 + u2) / max(abs(lhs), abs(u1), abs(u2))

    lhs = pairing(r[(2, 0, 1)], q)
    rhs = pairing(r[(1, 0, 1)], r[(1, 0, 0)]) - pairing(r[(2, 0, 0)], r[(0, 0, 1)])
    out["id_r201_q"] = (lhs - rhs) / max(abs(lhs), abs(rhs))

    c4_simple = -ip["l_minus_g1_g1"] / (2.0 * ip["l_minus_s1_s1"])
    out["c4_simple_rel"] = abs(constants["c4"] - c4_simple) / abs(c4_simple)
    return out


def _solvability_roots(ws, kernel_unit, constants, pairing, dx):
    """Re-derive each constant from its order-5 solvability condition.

    The order-5 right-hand side is affine in the constant (through both the
    explicit term and the affine dependence of the order-4 corrector), so a
    two-point secant gives the root exactly; agreement with the closed-form
    value is the independent cross-check promised by the construction.
    """
    r = ws.r
    q = ws.q

    def overlap_500(c):
        b4 = r[(4, 0, 0)] + (c - constants["c1"]) * r[(0, 0, 1)]
        a, b2, b3 = r[(1, 0, 0)], r[(2, 0, 0)], r[(3, 0, 0)]
        cubic = 2.0 * b4 * a * q + 2.0 * b3 * b2 * q - 3.0 * b3 * a**2 + b2**2 * a
        rhs = 2.0 * c * b2 - 2.0 * b4 + ws.lam(b4) + ws.cubic(cubic)
        return pairing(rhs, kernel_unit["minus"])

    def overlap_310(c):
        b2v = r[(2, 1, 0)] - (c - constants["c2"]) * r[(0, 1, 0)]
        a, v, b2, b3 = r[(1, 0, 0)], r[(0, 1, 0)], r[(2, 0, 0)], r[(3, 0, 0)]
        bv = r[(1, 1, 0)]
        cubic = (
            -2.0 * b2v * a * q
            - 2.0 * b3 * v * q
            - 2.0 * b2 * v * a
            + 6.0 * bv * b2 * q
            - bv * a**2
        )
        rhs = c * ws.grad(a) - 2.0 * b2v + ws.lam(b2v) - ws.grad(b3) + ws.cubic(cubic)
        return pairing(rhs, kernel_unit["plus"])

    def overlap_301(c):
        b2e = r[(2, 0, 1)] - (c - constants["c3"]) * r[(0, 0, 1)]
        a, b2, b3, b4 = r[(1, 0, 0)], r[(2, 0, 0)], r[(3, 0, 0)], r[(4, 0, 0)]
        be, e = r[(1, 0, 1)], r[(0, 0, 1)]
        cubic = (
            2.0 * b2e * a * q
            + 2.0 * be * b2 * q
            - 3.0 * be * a**2
            + 2.0 * b3 * e * q
            + 2.0 * b2 * e * a
        )
        rhs = -2.0 * c * b2 + 4.0 * b4 - b2e + ws.lam(b2e) + ws.cubic(cubic)
        return pairing(rhs, kernel_unit["minus"])

    def overlap_120(c):
        v2 = r[(0, 2, 0)] - (c - constants["c4"]) * r[(0, 0, 1)]
        a, v, b2, bv = r[(1, 0, 0)], r[(0, 1, 0)], r[(2, 0, 0)], r[(1, 1, 0)]
        cubic = 2.0 * v2 * a * q + 2.0 * bv * v * q - 3.0 * v**2 * a
        rhs = -2.0 * c * b2 - ws.grad(bv) - 2.0 * v2 + ws.lam(v2) + ws.cubic(cubic)
        return pairing(rhs, kernel_unit["minus"])

    out = {}
    for name, fn in (
        ("c1", overlap_500),
        ("c2", overlap_310),
        ("c3", overlap_301),
        ("c4", overlap_120),
    ):
        c0 = constants[name]
        f0, f1 = fn(c0), fn(c0 + 1.0)
        root = c0 - f0 / (f1 - f0)
        out[name + "_solvability_rel"] = abs(root - c0) / abs(c0)
    return out


def _check_parameters(b, nu, eta):
    if eta < 0.0:
        raise ValueError("eta must be nonnegative, got %g" % eta)
    if abs(b) > 0.5 or abs(nu) > 0.5 or eta > 0.5:
        raise ValueError(
            "expansion parameters must satisfy |b|, |nu|, eta <= 0.5; got "
            "b=%g nu=%g eta=%g" % (b, nu, eta)
        )


def _check_grids(ps, gs):
    if ps.grid != gs.q.grid:
        raise GridMismatchError(
            "profile set grid %r does not match ground state grid %r"
            % (ps.grid, gs.q.grid)
        )


def _perturbation_values(ps, b, nu, eta):
    values = np.zeros(ps.grid.n_points, dtype=np.complex128)
    for (p, q, rr), field in ps.correctors.items():
        coeff = (1j * b) ** p * (1j * nu) ** q * eta**rr
        if coeff != 0.0:
            values += coeff * field.values
    return values


def assemble_qp(ps, q, b, nu, eta):
    """The modified profile Q_P(b, nu, eta) as a complex field."""
    _check_parameters(b, nu, eta)
    _check_grids(ps, q)
    return Field(ps.grid, q.q.values + _perturbation_values(ps, b, nu, eta))


def _apply_l_q(grid, q_sq, values):
    # blockwise potentials stay raw: the solves saw exactly this operator
    abs_xi = np.abs(grid.freqs)
    hat = np.fft.fft(values.real)
    d_re = np.fft.ifft((abs_xi + 1.0) * hat).real - 3.0 * q_sq * values.real
    hat = np.fft.fft(values.imag)
    d_im = np.fft.ifft((abs_xi + 1.0) * hat).real - q_sq * values.imag
    return d_re + 1j * d_im


def profile_error(ps, q, b, nu, eta):
    """Evaluate the profile error Psi_P with every term included.

    Psi_P = i L_Q[P] - i N_P + b Lambda Q_P - nu(1 + c2 b^2) grad Q_P
            - (b^2/2 + eta + c1 b^4 + c3 b^2 eta + c4 nu^2) d_b Q_P
            - b nu d_nu Q_P

    with N_P = Q(P^2 + 2|P|^2) + |P|^2 P the nonlinear remainder beyond the
    linearization.  Returns (psi, (l2, h1)).
    """
    _check_parameters(b, nu, eta)
    _check_grids(ps, q)
    grid = ps.grid
    q_values = q.q.values.real
    q_sq = q_values**2

    p_values = _perturbation_values(ps, b, nu, eta)
    qp = Field(grid, q_values + p_values)

    d_b = np.zeros(grid.n_points, dtype=np.complex128)
    d_nu = np.zeros(grid.n_points, dtype=np.complex128)
    for (p, qq, rr), field in ps.correctors.items():
        if p >= 1:
            d_b += (
                (1j * p) * (1j * b) ** (p - 1) * (1j * nu) ** qq * eta**rr
            ) * field.values
        if qq >= 1:
            d_nu += (
                (1j * qq) * (1j * b) ** p * (1j * nu) ** (qq - 1) * eta**rr
            ) * field.values

    abs_p_sq = (p_values * p_values.conj()).real
    n_p = dealias_values(
        grid,
        q_values * (p_values**2 + 2.0 * abs_p_sq) + abs_p_sq * p_values,
    )

    b_poly = 0.5 * b**2 + eta + ps.c1 * b**4 + ps.c3 * b**2 * eta + ps.c4 * nu**2
    x_poly = nu * (1.0 + ps.c2 * b**2)

    psi = (
        1j * _apply_l_q(grid, q_sq, p_values)
        - 1j * n_p
        + b * _scaling_generator(grid)(qp.values)
        - x_poly * derivative(qp).values
        - b_poly * d_b
        - (b * nu) * d_nu
    )
    psi_field = Field(grid, psi)
    return psi_field, (norm_l2(psi_field), sobolev_norm(psi_field, 1.0))


def momentum_expansion_check(ps, q, nu_values=(0.01, 0.02, 0.03, 0.04, 0.05)):
    """Fit the momentum of Q_P(0, nu, 0) against the predicted linear law.

    The momentum is odd in nu, so the ratio P/nu is fitted affinely in
    nu^2; the intercept is the measured slope, compared against
    2 (L- G1, G1).  Returns a report dict with the fit residuals.
    """
    _check_grids(ps, q)
    nus = np.asarray(nu_values, dtype=np.float64)
    momenta = np.array(
        [
            conserved_quantities(assemble_qp(ps, q, 0.0, nu, 0.0))[1]
            for nu in nus
        ]
    )
    ratios = momenta / nus
    curvature, slope = np.polyfit(nus**2, ratios, 1)
    fit = slope + curvature * nus**2
    predicted = 2.0 * ps.identity_residuals["l_minus_g1_g1"]
    return {
        "slope": float(slope),
        "predicted": float(predicted),
        "relative_error": float(abs(slope - predicted) / abs(predicted)),
        "curvature": float(curvature),
        "nu_values": [float(v) for v in nus],
        "momenta": [float(m) for m in momenta],
        "fit_residuals": [float(rr) for rr in (ratios - fit)],
    }


def save_profiles(ps, directory):
    """Persist a profile set: one field container per corrector + manifest."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    for order, field in ps.correctors.items():
        save_field(path / ("corrector_%d_%d_%d.npz" % order), field)
    manifest = {
        "format": PROFILE_FORMAT,
        "constants": {"c1": ps.c1, "c2": ps.c2, "c3": ps.c3, "c4": ps.c4},
        "identity_residuals": ps.identity_residuals,
        "orders": [list(order) for order in ORDERS],
        "n_points": ps.grid.n_points,
        "length": ps.grid.length,
    }
    with open(path / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_profiles(directory):
    path = Path(directory)
    with open(path / "manifest.json") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != PROFILE_FORMAT:
        raise ValueError(
            "unrecognized profile manifest format %r" % manifest.get("format")
        )
    correctors = {}
    for entry in manifest["orders"]:
        order = tuple(int(v) for v in entry)
        field, _ = load_field(path / ("corrector_%d_%d_%d.npz" % order))
        correctors[order] = field
    constants = manifest["constants"]
    return ProfileSet(
        correctors=correctors,
        c1=float(constants["c1"]),
        c2=float(constants["c2"]),
        c3=float(constants["c3"]),
        c4=float(constants["c4"]),
        identity_residuals=dict(manifest["identity_residuals"]),
    )
