"""Built-in benchmark problems and their exact solutions.

Each case builder takes the mesh parameter ``nbar`` and a degree ``p`` and
returns a :class:`BuiltCase`: the multipatch problem, the exact solution (if
any) and a few defaults for the solver.  Patch indices are 0-based in code;
names such as ``omega1`` in docstrings count from one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import sympy
from scipy.optimize import root

from .assembly import Patch, ProblemSpec
from .bspline import make_open_knot_vector
from .coupling import InterfacePair
from .geometry import (
    GeometryMap,
    interpolate_curve_bspline,
    make_box,
    make_coons_patch,
    make_extruded,
    make_ring_sector,
    make_ruled_interface_patch,
    refine,
)
from .schur import MultipatchProblem

__all__ = [
    "ExactSolution",
    "SympyExact",
    "KelloggExact",
    "BuiltCase",
    "Case",
    "kellogg_parameters",
    "kellogg_exact",
    "builtin_cases",
    "exact_solution",
    "EXACT_SOLUTIONS",
]


class ExactSolution:
    """Interface of exact solutions: values, gradients and the Laplacian at points ``x[m, d]``."""

    name = ""
    dim = 2

    def u(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, x) -> np.ndarray:
        raise NotImplementedError

    def source(self, nu: float, alpha: float) -> Callable:
        """``f = -nu lap(u) + alpha u`` for constant coefficients."""
        return lambda x: -nu * self.laplacian(x) + alpha * self.u(x)

    def params(self) -> dict:
        return {}


class SympyExact(ExactSolution):
    """Exact solution given as a symbolic expression in ``x, y[, z]``.

    Derivatives are taken symbolically and compiled with ``lambdify``.
    """

    def __init__(self, name: str, expr: str, dim: int = 2, **params):
        self.name = name
        self.dim = dim
        self._params = params
        self.symbols = sympy.symbols("x y z")[:dim]
        subs = {sympy.Symbol(k): sympy.nsimplify(v) for k, v in params.items()}
        local = {k: sympy.Symbol(k) for k in params}
        local.update({str(v): v for v in self.symbols})
        self.expr = sympy.sympify(expr, locals=local).subs(subs)

    def params(self) -> dict:
        return dict(self._params)

    @cached_property
    def _funcs(self):
        s = self.symbols
        grad = [sympy.diff(self.expr, v) for v in s]
        lap = sum(sympy.diff(g, v) for g, v in zip(grad, s))
        return (sympy.lambdify(s, self.expr, "numpy"),
                [sympy.lambdify(s, g, "numpy") for g in grad],
                sympy.lambdify(s, lap, "numpy"))

    def _call(self, fn, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.broadcast_to(fn(*x.T[: self.dim]), (x.shape[0],)).astype(float)

    def u(self, x):
        return self._call(self._funcs[0], x)

    def grad(self, x):
        return np.stack([self._call(g, x) for g in self._funcs[1]], axis=-1)

    def laplacian(self, x):
        return self._call(self._funcs[2], x)


def kellogg_parameters(gamma: float):
    """``(R, rho, sigma)`` of the checkerboard problem whose solution is ``r^gamma mu(theta)``.

    The three transmission conditions

        R = -tan((pi/2 - sigma) gamma) cot(rho gamma)
        1/R = -tan(rho gamma) cot(sigma gamma)
        R = -tan(sigma gamma) cot((pi/2 - rho) gamma)

    are solved by Newton's method (MINPACK hybrid), started inside the
    admissible region

        max(0, pi gamma - pi) < 2 gamma rho < min(gamma pi, pi)
        max(0, pi - gamma pi) < -2 gamma sigma < min(pi, 2 pi - gamma pi).

    Raises
    ------
    ValueError
        For ``gamma`` outside ``(0, 2)``, ``gamma == 1``, non-convergence or a
        root outside the admissible region.
    """
    g = float(gamma)
    if not 0.0 < g < 2.0 or g == 1.0:
        raise ValueError(f"gamma must lie in (0, 2) and differ from 1, got {gamma}")
    pi = np.pi
    rho_lo, rho_hi = max(0.0, pi * g - pi), min(g * pi, pi)
    sig_lo, sig_hi = max(0.0, pi - g * pi), min(pi, 2 * pi - g * pi)

    def eqs(z):
        R, rho, sigma = z
        return [R + np.tan((pi / 2 - sigma) * g) / np.tan(rho * g),
                1.0 / R + np.tan(rho * g) / np.tan(sigma * g),
                R + np.tan(sigma * g) / np.tan((pi / 2 - rho) * g)]

    rho0 = 0.5 * (rho_lo + rho_hi) / (2 * g)
    sigma0 = -0.5 * (sig_lo + sig_hi) / (2 * g)
    R0 = -np.tan(sigma0 * g) / np.tan((pi / 2 - rho0) * g)
    sol = root(eqs, [R0, rho0, sigma0], method="hybr", options={"xtol": 1e-14})
    R, rho, sigma = sol.x
    res = np.abs(eqs(sol.x)).max()
    if not sol.success or res > 1e-10 * max(1.0, abs(R)):
        raise ValueError(f"Kellogg system did not converge for gamma={gamma} (residual {res:.2e})")
    if not (rho_lo < 2 * g * rho < rho_hi and sig_lo < -2 * g * sigma < sig_hi and R > 0):
        raise ValueError(f"Kellogg root for gamma={gamma} violates the admissibility constraints")
    return float(R), float(rho), float(sigma)


def _kellogg_mu(theta, gamma, rho, sigma, derivative=False):
    pi = np.pi
    theta = np.mod(np.asarray(theta, dtype=float), 2 * pi)
    amp_shift = [
        (np.cos((pi / 2 - sigma) * gamma), pi / 2 - rho),
        (np.cos(rho * gamma), pi - sigma),
        (np.cos(sigma * gamma), pi + rho),
        (np.cos((pi / 2 - rho) * gamma), 3 * pi / 2 + sigma),
    ]
    quad = np.minimum((theta // (pi / 2)).astype(int), 3)
    amp = np.array([a for a, _ in amp_shift])[quad]
    shift = np.array([s for _, s in amp_shift])[quad]
    arg = (theta - shift) * gamma
    if derivative:
        return -gamma * amp * np.sin(arg)
    return amp * np.cos(arg)


def kellogg_exact(r, theta, gamma, rho, sigma):
    """Value and polar derivatives ``(u, du/dr, du/dtheta)`` of ``r^gamma mu(theta)``."""
    r = np.asarray(r, dtype=float)
    mu = _kellogg_mu(theta, gamma, rho, sigma)
    dmu = _kellogg_mu(theta, gamma, rho, sigma, derivative=True)
    return r ** gamma * mu, gamma * r ** (gamma - 1) * mu, r ** gamma * dmu


class KelloggExact(ExactSolution):
    """Checkerboard solution ``r^gamma mu(theta)`` on ``(-1, 1)^2``."""

    def __init__(self, gamma: float = 0.6):
        self.name = "kellogg"
        self.dim = 2
        self.gamma = float(gamma)
        self.R, self.rho, self.sigma = kellogg_parameters(gamma)

    def params(self) -> dict:
        return {"gamma": self.gamma}

    def _polar(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.hypot(x[:, 0], x[:, 1])
        th = np.arctan2(x[:, 1], x[:, 0])
        return r, th

    def u(self, x):
        r, th = self._polar(x)
        return kellogg_exact(r, th, self.gamma, self.rho, self.sigma)[0]

    def grad(self, x):
        r, th = self._polar(x)
        _, ur, ut = kellogg_exact(r, th, self.gamma, self.rho, self.sigma)
        c, s = np.cos(th), np.sin(th)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.stack([c * ur - s * ut / r, s * ur + c * ut / r], axis=-1)

    def laplacian(self, x):
        return np.zeros(np.atleast_2d(x).shape[0])

    def nu(self, quadrant: int) -> float:
        """Diffusion in quadrant 0..3 (counter-clockwise from the first)."""
        return self.R if quadrant in (0, 2) else 1.0


_T1 = ("sin(3*pi*x/2)*sin(3*pi*y)", 2)
_T2 = ("exp(-3*(x-1)**2-4*(y-3/5)**2)*(1+sin(3*pi*x)*cos(3*pi*y))", 2)
_T6 = ("sin(pi*x)*sin(pi*y)*cos(2*pi*z)", 3)
_T7 = ("(x**2+y**2)**(beta/2)*sin(beta*(atan2(y, x)+pi/2))*sin(beta*z)", 3)
_POLY = ("1 + x/2 - y/3", 2)


def exact_solution(name: str, **params) -> ExactSolution:
    """Named exact solutions used by the built-in cases and the config files."""
    if name == "kellogg":
        return KelloggExact(**params)
    table = {"t1_sine": _T1, "t2_bump": _T2, "t6_sine3d": _T6, "t7_reentrant": _T7,
             "affine": _POLY}
    if name not in table:
        raise KeyError(f"unknown exact solution {name!r}; choose from {sorted(table) + ['kellogg']}")
    expr, dim = table[name]
    if name == "t7_reentrant":
        params.setdefault("beta", 2.0 / 3.0)
    return SympyExact(name, expr, dim, **params)


EXACT_SOLUTIONS = ("t1_sine", "t2_bump", "t6_sine3d", "t7_reentrant", "affine", "kellogg")


@dataclass
class BuiltCase:
    """A concrete problem instance.

    Attributes
    ----------
    problem : MultipatchProblem
    exact : ExactSolution or None
    precond : str
        Preconditioner used by default for this case.
    gap_pairs : list of (face, face)
        Non-watertight pairs whose gap is reported as ``d_gamma``.
    coefficients : list of dict
        Per-patch constant ``nu`` and ``alpha`` (for serialization).
    source : float or None
        Constant source term when the case has no exact solution.
    """

    problem: MultipatchProblem
    exact: ExactSolution | None
    precond: str = "none"
    gap_pairs: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    source: float | None = None


@dataclass
class Case:
    """Registry entry: a builder plus its documented defaults."""

    name: str
    description: str
    build: Callable
    default_p: int = 2
    default_nbars: tuple = (8, 16, 24, 32)
    dim: int = 2

    def __call__(self, nbar: int | None = None, p=None, **options) -> BuiltCase:
        nbar = self.default_nbars[0] if nbar is None else int(nbar)
        if nbar < 1:
            raise ValueError(f"nbar must be a positive integer, got {nbar}")
        p = self.default_p if p is None else p
        return self.build(nbar, p, **options)


def _patch(geo, tags, exact, nu=1.0, alpha=0.0, f=None):
    if exact is not None:
        spec = ProblemSpec(nu=nu, alpha=alpha, f=exact.source(nu, alpha), g=exact.u)
    else:
        spec = ProblemSpec(nu=nu, alpha=alpha, f=0.0 if f is None else f, g=0.0)
    return Patch(geo, tags, spec)


def _ring(r0, r1, t0, t1, p, n_el):
    return refine(make_ring_sector(r0, r1, t0, t1), degrees=(p, p), n_el=n_el)


# ---------------------------------------------------------------------------
# test 1: quarter annulus in two patches
# ---------------------------------------------------------------------------

_T1_SETS = {
    "balanced": lambda n: ((max(n // 2, 1), n), (max(n // 2, 1), n + 1)),
    "master_refined": lambda n: ((n - 1, 2 * (n - 1)), (max(n // 2, 1), n)),
    "slave_refined": lambda n: ((max(n // 2, 1), n), (n, 2 * n + 1)),
    "conforming": lambda n: ((max(n // 2, 1), n), (max(n // 2, 1), n)),
}


def build_t1(nbar: int, p: int = 2, elements: str = "balanced") -> BuiltCase:
    """Quarter annulus ``1 <= r <= 2`` cut at ``r = 1.5``; omega1 (inner) is master.

    ``elements`` selects the element counts (radial x angular) of the two
    patches: ``balanced``, ``master_refined``, ``slave_refined`` or
    ``conforming`` (identical discretizations, used by the merged-patch check).
    """
    exact = exact_solution("t1_sine")
    n1, n2 = _T1_SETS[elements](nbar)
    p1, p2 = (p, p) if np.isscalar(p) else p
    g1 = _ring(1.0, 1.5, 0.0, np.pi / 2, p1, n1)
    g2 = _ring(1.5, 2.0, 0.0, np.pi / 2, p2, n2)
    patches = [
        _patch(g1, dict(u0="d", u1="i", v0="d", v1="d"), exact),
        _patch(g2, dict(u0="i", u1="d", v0="d", v1="d"), exact),
    ]
    pairs = [InterfacePair((0, "u1"), (1, "u0"))]
    prob = MultipatchProblem(patches, pairs, f"t1_{elements}")
    return BuiltCase(prob, exact, "local_schur", coefficients=[{"nu": 1.0, "alpha": 0.0}] * 2)


def build_t1_merged(nbar: int, p: int = 2) -> Patch:
    """Single-patch twin of ``t1`` with ``elements='conforming'``.

    The radial knot ``1/2`` is repeated ``p`` times so the space is the
    C0-glued union of the two conforming patch spaces.
    """
    exact = exact_solution("t1_sine")
    (nr, nt), _ = _T1_SETS["conforming"](nbar)
    geo = refine(make_ring_sector(1.0, 2.0, 0.0, np.pi / 2), degrees=(p, p))
    radial = [i / (2 * nr) for i in range(1, 2 * nr) if i != nr] + [0.5] * p
    angular = [i / nt for i in range(1, nt)]
    geo = refine(geo, knots=(sorted(radial), angular))
    return _patch(geo, dict(u0="d", u1="d", v0="d", v1="d"), exact)


# ---------------------------------------------------------------------------
# test 2: rectangle with a non-watertight sinusoidal interface
# ---------------------------------------------------------------------------

def _t2_interface(y):
    return 1.0 + 0.2 * np.sin(2 * np.pi * y)


def _t2_patch_geometry(p, n_el, side, final_knots):
    """Ruled patch between the interpolated interface and the straight side ``x = 0`` or ``2``."""
    x_side = 0.0 if side == "left" else 2.0
    kv = make_open_knot_vector(p, n_el) if final_knots else make_open_knot_vector(p, 1)
    curve = interpolate_curve_bspline(_t2_interface, p, kv)
    straight = interpolate_curve_bspline(lambda t: np.full_like(t, x_side), p, kv)
    geo = make_ruled_interface_patch(curve, straight, curve_first=(side == "right"))
    geo = refine(geo, degrees=(p, p))
    if final_knots:
        return refine(geo, n_el=(n_el, 1))
    return refine(geo, n_el=(n_el, n_el))


def build_t2(nbar: int, p=(4, 3), mode: str = "fixed") -> BuiltCase:
    """Rectangle ``(0,2) x (0,1)`` split by ``x = 1 + 0.2 sin(2 pi y)``.

    Each interface is a B-spline interpolant of the sinusoid on its own patch,
    so the two faces do not match (non-watertight).  ``mode='fixed'`` builds
    the curves on a single element of degree ``p_k`` and h-refines afterwards
    (fixed gap); ``mode='variable'`` interpolates on the final knots (gap
    shrinking like ``h^p``).  Element counts are ``(nbar-1)^2`` and
    ``(nbar+1)^2``; omega1 is master.
    """
    exact = exact_solution("t2_bump")
    p1, p2 = (p, p) if np.isscalar(p) else p
    final = mode == "variable"
    if mode not in ("fixed", "variable"):
        raise ValueError(f"mode must be 'fixed' or 'variable', got {mode!r}")
    g1 = _t2_patch_geometry(p1, max(nbar - 1, 1), "left", final)
    g2 = _t2_patch_geometry(p2, nbar + 1, "right", final)
    patches = [
        _patch(g1, dict(u0="d", u1="i", v0="d", v1="d"), exact),
        _patch(g2, dict(u0="i", u1="d", v0="d", v1="d"), exact),
    ]
    pairs = [InterfacePair((0, "u1"), (1, "u0"), watertight=False)]
    prob = MultipatchProblem(patches, pairs, f"t2_{mode}")
    return BuiltCase(prob, exact, "local_schur", gap_pairs=[((0, "u1"), (1, "u0"))],
                     coefficients=[{"nu": 1.0, "alpha": 0.0}] * 2)


# ---------------------------------------------------------------------------
# test 3: quarter annulus in seven patches
# ---------------------------------------------------------------------------

def build_t3(nbar: int, p: int = 2) -> BuiltCase:
    """Quarter annulus in seven ring sectors with T-junctions.

    Layout (radius range, angle range in degrees):
    omega6 [1, 4/3] x [0, 45], omega7 [1, 4/3] x [45, 90],
    omega1 [4/3, 2] x [0, 30], omega2 [4/3, 5/3] x [30, 60],
    omega3 [5/3, 2] x [30, 60], omega4 [5/3, 2] x [60, 90],
    omega5 [4/3, 5/3] x [60, 90].
    """
    exact = exact_solution("t1_sine")
    d = np.pi / 180
    r0, r1, r2, r3 = 1.0, 4 / 3, 5 / 3, 2.0
    n = nbar
    layout = [  # radial, angular ranges and element counts
        ((r1, r3), (0, 30), (n + 2, n)),
        ((r1, r2), (30, 60), (n, n)),
        ((r2, r3), (30, 60), (n + 1, n + 1)),
        ((r2, r3), (60, 90), (n + 1, n + 1)),
        ((r1, r2), (60, 90), (n, n)),
        ((r0, r1), (0, 45), (n, 3 * n)),
        ((r0, r1), (45, 90), (n + 2, n)),
    ]
    tags = [
        dict(u0="i", u1="d", v0="d", v1="i"),
        dict(u0="i", u1="i", v0="i", v1="i"),
        dict(u0="i", u1="d", v0="i", v1="i"),
        dict(u0="i", u1="d", v0="i", v1="d"),
        dict(u0="i", u1="i", v0="i", v1="d"),
        dict(u0="d", u1="i", v0="d", v1="i"),
        dict(u0="d", u1="i", v0="i", v1="d"),
    ]
    patches = [
        _patch(_ring(rr[0], rr[1], aa[0] * d, aa[1] * d, p, ne), t, exact)
        for (rr, aa, ne), t in zip(layout, tags)
    ]
    pairs = [
        InterfacePair((5, "u1"), (0, "u0")),
        InterfacePair((5, "u1"), (1, "u0")),
        InterfacePair((6, "u1"), (1, "u0")),
        InterfacePair((6, "u1"), (4, "u0")),
        InterfacePair((5, "v1"), (6, "v0")),
        InterfacePair((0, "v1"), (1, "v0")),
        InterfacePair((0, "v1"), (2, "v0")),
        InterfacePair((1, "u1"), (2, "u0")),
        InterfacePair((3, "u0"), (4, "u1")),
        InterfacePair((1, "v1"), (4, "v0")),
        InterfacePair((3, "v0"), (2, "v1")),
    ]
    prob = MultipatchProblem(patches, pairs, "t3_ring7")
    return BuiltCase(prob, exact, "none", coefficients=[{"nu": 1.0, "alpha": 0.0}] * 7)


# ---------------------------------------------------------------------------
# test 4: Kellogg checkerboard
# ---------------------------------------------------------------------------

def build_t4(nbar: int, p: int = 2, gamma: float = 0.6, masters: str = "even") -> BuiltCase:
    """Checkerboard diffusion on ``(-1, 1)^2``, one patch per quadrant.

    omega1..omega4 are the quadrants counter-clockwise from ``(0,1)^2``;
    ``nu = R`` in omega1 and omega3.  omega1 and omega3 get
    ``(2 nbar + 1)^2`` elements, omega2 and omega4 ``(nbar - 1)^2``.  With
    ``masters='even'`` all interfaces of omega2 and omega4 are master;
    ``masters='odd'`` flips the roles.
    """
    exact = KelloggExact(gamma)
    boxes = [((0, 0), (1, 1)), ((-1, 0), (0, 1)), ((-1, -1), (0, 0)), ((0, -1), (1, 0))]
    fine, coarse = 2 * nbar + 1, max(nbar - 1, 1)
    counts = [fine, coarse, fine, coarse]
    tags = [
        dict(u0="i", u1="d", v0="i", v1="d"),
        dict(u0="d", u1="i", v0="i", v1="d"),
        dict(u0="d", u1="i", v0="d", v1="i"),
        dict(u0="i", u1="d", v0="d", v1="i"),
    ]
    patches, coefs = [], []
    for q, ((lo, hi), ne, t) in enumerate(zip(boxes, counts, tags)):
        geo = refine(make_box(lo, hi), degrees=(p, p), n_el=(ne, ne))
        nu = exact.nu(q)
        patches.append(_patch(geo, t, exact, nu=nu))
        coefs.append({"nu": nu, "alpha": 0.0})
    faces = [((0, "u0"), (1, "u1")), ((0, "v0"), (3, "v1")),
             ((2, "u1"), (3, "u0")), ((2, "v1"), (1, "v0"))]
    pairs = []
    for a, b in faces:
        m, s = (b, a) if masters == "even" else (a, b)
        pairs.append(InterfacePair(m, s))
    prob = MultipatchProblem(patches, pairs, "t4_kellogg")
    return BuiltCase(prob, exact, "dn", coefficients=coefs)


# ---------------------------------------------------------------------------
# test 5: nine patches with non-watertight interfaces
# ---------------------------------------------------------------------------

T5_NU = (10.0, 0.005, 1.0, 0.01, 100.0, 0.005, 1.0, 0.005, 0.1)
T5_AMPLITUDE = 0.28


def _t5_curve(q, start, end, wave, amplitude):
    start, end = np.asarray(start, float), np.asarray(end, float)
    direction = end - start
    normal = np.array([-direction[1], direction[0]]) / np.linalg.norm(direction)

    def pts(t):
        bump = wave * amplitude * np.sin(2 * np.pi * t)
        return start + t[:, None] * direction + bump[:, None] * normal
    return interpolate_curve_bspline(pts, q)


def build_t5(nbar: int = 4, p: int = 4, amplitude: float = T5_AMPLITUDE) -> BuiltCase:
    """``(0,3)^2`` in a 3 x 3 grid of Coons patches glued along wavy interfaces.

    Patch ``k = 1 + a + 3 b`` covers column ``a`` and row ``b``.  Every
    internal edge is one period of a sine of height ``amplitude``, interpolated
    by each neighbour in its own space as in ``t2``: quartic on a single
    element for the odd (master) patches, cubic for the even (slave) ones.  The source is 1,
    ``alpha = 1`` and the boundary data vanish.
    """
    patches, coefs = [], []
    pairs = []
    for b in range(3):
        for a in range(3):
            k = a + 3 * b
            master = k % 2 == 0  # 1-based odd
            q = 4 if master else 3

            def edge(c0, c1, internal, wave):
                return _t5_curve(q, c0, c1, wave if internal else 0.0, amplitude)
            # vertical edges alternate direction of the bump with the column
            left = edge((a, b), (a, b + 1), a > 0, (-1) ** a)
            right = edge((a + 1, b), (a + 1, b + 1), a < 2, (-1) ** (a + 1))
            bottom = edge((a, b), (a + 1, b), b > 0, (-1) ** b)
            top = edge((a, b + 1), (a + 1, b + 1), b < 2, (-1) ** (b + 1))
            geo = make_coons_patch(left, right, bottom, top)
            ne = nbar + (1 if master else 0)
            geo = refine(geo, degrees=(p, p), n_el=(ne, ne))
            tags = dict(u0="i" if a > 0 else "d", u1="i" if a < 2 else "d",
                        v0="i" if b > 0 else "d", v1="i" if b < 2 else "d")
            patches.append(_patch(geo, tags, None, nu=T5_NU[k], alpha=1.0, f=1.0))
            coefs.append({"nu": T5_NU[k], "alpha": 1.0})
            if a < 2:
                own, other = (k, "u1"), (k + 1, "u0")
                m, s = (own, other) if master else (other, own)
                pairs.append(InterfacePair(m, s, watertight=False))
            if b < 2:
                own, other = (k, "v1"), (k + 3, "v0")
                m, s = (own, other) if master else (other, own)
                pairs.append(InterfacePair(m, s, watertight=False))
    prob = MultipatchProblem(patches, pairs, "t5_nine_nonwatertight")
    gaps = [(pr.master, pr.slave) for pr in pairs]
    return BuiltCase(prob, None, "dn", gap_pairs=gaps, coefficients=coefs, source=1.0)


# ---------------------------------------------------------------------------
# test 6: 3D ring sectors
# ---------------------------------------------------------------------------

def build_t6(nbar: int = 2, p: int = 2) -> BuiltCase:
    """Four extruded ring sectors of ``0.5 <= r <= 1.5, 0 <= z <= 1``.

    omega1: r in [0.5, 1], full quarter, z in [0, 1]; omega2: r in [1, 1.5],
    z in [0, 0.5]; omega3 and omega4: r in [1, 1.5], z in [0.5, 1], split at
    45 degrees.  Master faces: omega1 at r = 1, omega3 at 45 degrees, omega3
    and omega4 at z = 0.5.
    """
    exact = exact_solution("t6_sine3d")
    n = nbar
    layout = [
        ((0.5, 1.0), (0.0, np.pi / 2), (0.0, 1.0), n),
        ((1.0, 1.5), (0.0, np.pi / 2), (0.0, 0.5), n + 1),
        ((1.0, 1.5), (0.0, np.pi / 4), (0.5, 1.0), n + 1),
        ((1.0, 1.5), (np.pi / 4, np.pi / 2), (0.5, 1.0), n),
    ]
    tags = [
        dict(u0="d", u1="i", v0="d", v1="d", w0="d", w1="d"),
        dict(u0="i", u1="d", v0="d", v1="d", w0="d", w1="i"),
        dict(u0="i", u1="d", v0="d", v1="i", w0="i", w1="d"),
        dict(u0="i", u1="d", v0="i", v1="d", w0="i", w1="d"),
    ]
    patches = []
    for (rr, tt, zz, ne), t in zip(layout, tags):
        geo = make_extruded(make_ring_sector(rr[0], rr[1], tt[0], tt[1]), zz[0], zz[1])
        geo = refine(geo, degrees=(p, p, p), n_el=(ne, ne, ne))
        patches.append(_patch(geo, t, exact, alpha=1.0))
    pairs = [
        InterfacePair((0, "u1"), (1, "u0")),
        InterfacePair((0, "u1"), (2, "u0")),
        InterfacePair((0, "u1"), (3, "u0")),
        InterfacePair((2, "v1"), (3, "v0")),
        InterfacePair((2, "w0"), (1, "w1")),
        InterfacePair((3, "w0"), (1, "w1")),
    ]
    prob = MultipatchProblem(patches, pairs, "t6_3d_smoke")
    return BuiltCase(prob, exact, "none", coefficients=[{"nu": 1.0, "alpha": 1.0}] * 4)


# ---------------------------------------------------------------------------
# test 7: 3D re-entrant corner
# ---------------------------------------------------------------------------

def _segment_as_arc(a, b, w):
    """Straight segment as a rational quadratic with the weights of an arc."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    P = np.array([a, 0.5 * (a + b), b])
    return GeometryMap.from_arrays((make_open_knot_vector(2, 1),), np.array([1.0, w, 1.0]), P)


def _arc_curve(center, radius, t0, t1):
    half = 0.5 * (t1 - t0)
    mid = 0.5 * (t0 + t1)
    w = np.cos(half)
    P = np.array([[np.cos(t0), np.sin(t0)], [np.cos(mid) / w, np.sin(mid) / w],
                  [np.cos(t1), np.sin(t1)]]) * radius + np.asarray(center)
    return GeometryMap.from_arrays((make_open_knot_vector(2, 1),), np.array([1.0, w, 1.0]), P)


def build_t7(nbar: int = 2, p: int = 2, beta: float = 2.0 / 3.0) -> BuiltCase:
    """Quarter disc about ``(-0.5, -0.5)`` of radius 2 minus ``[-0.5, 0)^2``, extruded to ``z in [0, 1]``.

    The plane section is cut into four sectors of 22.5 degrees seen from the
    disc centre; each is ruled between its piece of the removed square's
    boundary and its arc.  Element counts (radial, angular, vertical):
    ``nbar x 3nbar x nbar``, ``3nbar x nbar x nbar``, ``nbar x (nbar+2) x nbar``,
    ``nbar x (nbar+1) x nbar``.  omega2 and omega4 are master patches.
    """
    exact = exact_solution("t7_reentrant", beta=beta)
    c = np.array([-0.5, -0.5])
    n = nbar
    counts = [(n, 3 * n, n), (3 * n, n, n), (n, n + 2, n), (n, n + 1, n)]
    cuts = np.linspace(0.0, np.pi / 2, 5)
    # the removed square seen from c: x = 0 for angles in [0, pi/4], y = 0 beyond
    def inner_point(phi):
        if phi <= np.pi / 4 + 1e-15:
            return c + np.array([0.5, 0.5 * np.tan(phi)])
        return c + np.array([0.5 / np.tan(phi), 0.5])
    patches = []
    for j in range(4):
        arc = _arc_curve(c, 2.0, cuts[j], cuts[j + 1])
        seg = _segment_as_arc(inner_point(cuts[j]), inner_point(cuts[j + 1]), arc.weights[1])
        plane = make_ruled_interface_patch(arc, seg)
        geo = make_extruded(plane, 0.0, 1.0)
        geo = refine(geo, degrees=(p, p, p), n_el=counts[j])
        tags = dict(u0="d", u1="d", v0="i" if j > 0 else "d", v1="i" if j < 3 else "d",
                    w0="d", w1="d")
        patches.append(_patch(geo, tags, exact))
    pairs = [
        InterfacePair((1, "v0"), (0, "v1")),
        InterfacePair((1, "v1"), (2, "v0")),
        InterfacePair((3, "v0"), (2, "v1")),
    ]
    prob = MultipatchProblem(patches, pairs, "t7_reentrant_smoke")
    return BuiltCase(prob, exact, "dn", coefficients=[{"nu": 1.0, "alpha": 0.0}] * 4)


def builtin_cases() -> dict:
    """Registry of the built-in cases by name."""
    entries = [
        Case("t1_balanced", "quarter annulus, 2 patches, balanced element counts",
             lambda n, p, **o: build_t1(n, p, "balanced", **o)),
        Case("t1_master_refined", "quarter annulus, master side refined",
             lambda n, p, **o: build_t1(n, p, "master_refined", **o)),
        Case("t1_slave_refined", "quarter annulus, slave side refined",
             lambda n, p, **o: build_t1(n, p, "slave_refined", **o)),
        Case("t2_nonwatertight", "rectangle with a non-watertight sinusoidal interface",
             build_t2, default_p=(4, 3), default_nbars=(4, 8, 16, 24, 32)),
        Case("t3_ring7", "quarter annulus in seven patches with T-junctions", build_t3,
             default_nbars=(4, 8, 16)),
        Case("t4_kellogg", "Kellogg checkerboard problem", build_t4,
             default_nbars=(5, 10, 15, 20)),
        Case("t5_nine_nonwatertight", "nine Coons patches, jumping coefficients", build_t5,
             default_p=4, default_nbars=(4,)),
        Case("t6_3d_smoke", "3D ring sectors (smoke scale)", build_t6,
             default_nbars=(2, 3), dim=3),
        Case("t7_reentrant_smoke", "3D re-entrant corner (smoke scale)", build_t7,
             default_nbars=(2, 3), dim=3),
    ]
    return {c.name: c for c in entries}
