"""Flow-equation engine: effective force coefficients, contraction maps,
Taylor reconstruction maps, the expectation flow, and the renormalization
engine producing counterterms.

Scale decomposition.  The heat propagator splits as G = G_mu + Ghat_mu with
G_mu the large-time part (supported in t > mu) and Ghat_mu = G - G_mu the
fluctuation part (supported in t < 2 mu).  The effective force at scale mu
is the unique lambda-graded solution of

    F_mu[phi] = F[phi + Ghat_mu * F_mu[phi]],

where F is the bare force.  Its m = 0 coefficients at mu = 1, evaluated on a
noise sample, are the pathwise fields f^i driving the stationary expansion;
its expectations at the relevant indices are pinned at mu = 1 by the
renormalization scheme and transported to mu = 0 by the flow

    counterterm f^(i,m,a) = anchor - integral_0^1 d/dmu <f^(i,m,a)_mu> dmu.

Expectation flow realization.  For order i = 1 and Gaussian noise the flow
closes on the scalar tadpole curve

    C(mu) = < (Ghat_mu * Xi)(x)^2 >,     dC/dmu = -2 D(mu),
    D(mu) = < (Ghat_mu * Xi)(x) (Gdot_mu * Xi)(x) >,

both evaluated as exact discrete Wick sums over lattice modes with the same
quadrature weights as the convolution operator, so the flow integral and the
direct Wick oracle agree up to mu-quadrature error only.  Contracting k
pairs of a degree-m monomial into a degree m - 2k coefficient carries the
pairing count m! / ((m - 2k)! k! 2^k).  Order i = 2 is provided for the
cubic Z2 class through the closed sunset form (see flow_expected).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationFault
from .kernels import chi, chi_prime, convolve, fluctuation_kernel
from .lattice import SPACE_TIME, TORUS_LEN, Field, LatticeSpec
from .model import ModelSpec, RenormScheme, coefficient_value, relevant_filtered
from .noise import NoiseModel, _spatial_multiplier, _temporal_taps

MAX_PATHWISE_ORDER = 8


def mu_grid_geometric(j_levels: int = 10) -> np.ndarray:
    """Geometric grid {2^-j, j = 0..J} matching the octave support of
    Gdot_mu."""
    return 2.0 ** (-np.arange(j_levels + 1, dtype=float))


# -- pathwise expansion ----------------------------------------------------


def _compositions(total: int, parts: int):
    """Ordered tuples of `parts` nonnegative integers summing to `total`."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def _spatial_derivative_data(spec: LatticeSpec, data: np.ndarray, aq: tuple) -> np.ndarray:
    if all(x == 0 for x in aq):
        return data
    grids = spec.freq_grids()
    mult = np.ones(spec.space_shape(), dtype=complex)
    for axis, deg in enumerate(aq):
        if deg:
            mult = mult * (1j * grids[axis]) ** deg
    fhat = np.fft.fftn(data, axes=tuple(range(1, spec.d + 1)))
    return np.fft.ifftn(mult[None] * fhat, axes=tuple(range(1, spec.d + 1))).real


def effective_force_series(
    model: ModelSpec,
    counterterms,
    noise: Field,
    phi_series: dict | None,
    i_max: int,
    mu: float = 1.0,
) -> dict:
    """Order-by-order solution of F_mu[phi] = F[phi + Ghat_mu * F_mu[phi]]
    for a lambda-graded external field phi = sum_i lambda^i phi_series[i].

    Returns {i: order-i coefficient of F_mu[phi] as a Field}.  With
    phi_series = None this yields the m = 0 effective force coefficients
    f^i evaluated on the noise sample (the closed recursion: each order uses
    only lower orders, so no mu-integration is needed).
    """
    if i_max > MAX_PATHWISE_ORDER:
        est = model.m_flat**i_max
        raise ValidationFault(
            f"pathwise order {i_max} exceeds budget {MAX_PATHWISE_ORDER} "
            f"(~{est} tree contractions per order)"
        )
    spec = noise.spec
    coeffs = _coefficient_table(model, counterterms)
    kernel = fluctuation_kernel(spec, mu)
    f_orders = {0: noise.data}
    u_orders = {}  # u^(k) = order-k part of phi + Ghat_mu * F_mu[phi]

    def u_of(k: int) -> np.ndarray:
        if k not in u_orders:
            conv = convolve(kernel, Field(spec, f_orders[k], SPACE_TIME)).data
            if phi_series is not None and k in phi_series:
                conv = conv + phi_series[k].data
            u_orders[k] = conv
        return u_orders[k]

    for i in range(1, i_max + 1):
        acc = np.zeros_like(noise.data)
        for (j, m, a), value in coeffs.items():
            if j > i or value == 0.0:
                continue
            sign = (-1.0) ** sum(sum(aq) for aq in a)
            for parts in _compositions(i - j, m):
                prod = np.ones_like(acc)
                for q, iq in enumerate(parts):
                    term = u_of(iq)
                    term = _spatial_derivative_data(spec, term, a[q])
                    prod = prod * term
                acc += sign * value * prod
        f_orders[i] = acc
    return {i: Field(spec, data, SPACE_TIME) for i, data in f_orders.items()}


def _coefficient_table(model: ModelSpec, counterterms) -> dict:
    from .model import _ct_dict

    ct = _ct_dict(counterterms)
    table = {}
    nu = model.noise.nu if model.noise is not None else 1.0
    for mo in model.monomials:
        key = (mo.i, mo.m, tuple(sorted(mo.a)))
        table[key] = coefficient_value(model, mo, nu)
    for key in relevant_filtered(model):
        if key in ct:
            table[key] = ct[key]
        elif key not in table:
            raise ValidationFault(f"missing relevant coefficient for index {key}")
    for key, value in ct.items():
        table.setdefault(key, value)
    return table


def expand_pathwise(
    model: ModelSpec,
    counterterms,
    noise: Field,
    i_max: int,
) -> dict:
    """Pathwise stationary hierarchy at mu = 1: fields f^i and their
    smoothed versions Psi^i = (G - G_1) * f^i."""
    f = effective_force_series(model, counterterms, noise, None, i_max, mu=1.0)
    kernel = fluctuation_kernel(noise.spec, 1.0)
    psi = {i: convolve(kernel, fi) for i, fi in f.items()}
    return {"f": f, "psi": psi}


def stationary_sum(expansion: dict, lam: float, i_max: int, which: str = "psi") -> Field:
    fields = expansion[which]
    spec = fields[0].spec
    acc = np.zeros_like(fields[0].data)
    for i in range(i_max + 1):
        acc += lam**i * fields[i].data
    return Field(spec, acc, SPACE_TIME)


# -- discrete Wick sums ----------------------------------------------------


class WickCalculator:
    """Exact second-moment computations for mollified white noise on the
    lattice, with the same discrete conventions as the sampler and the
    convolution operator: temporal taps of the mollifier, spatial mollifier
    multiplier, white-noise cell variance 1/(dt dx^d), and the half-weight
    at a kernel's t = 0 tap."""

    def __init__(self, spec: LatticeSpec, model: NoiseModel):
        if model.kind != "mollified_white":
            raise ValidationFault("Wick sums implemented for mollified_white noise")
        self.spec = spec
        self.model = model
        self.mhat2 = np.abs(_spatial_multiplier(model, spec)).ravel() ** 2
        self.taps = _temporal_taps(model, spec)
        self.acorr = np.correlate(self.taps, self.taps, mode="full")
        self.acorr_offset = len(self.taps) - 1
        self.k_sigma = spec.k_norm().ravel() ** spec.sigma
        self.prefactor = spec.dt / (spec.dx**spec.d * spec.n**spec.d)

    def _weights(self, lo: int, length: int) -> np.ndarray:
        w = np.full(length, self.spec.dt)
        if lo == 0 and length > 0:
            w[0] = 0.5 * self.spec.dt
        return w

    def _tap_smoothed(self, mult: np.ndarray, lo: int, n_pad: int) -> np.ndarray:
        """rfft along time of (quadrature-weighted kernel slices, placed at
        their absolute positions) convolved with the mollifier taps."""
        w = self._weights(lo, mult.shape[0])[:, None] * mult
        arr = np.zeros((lo + mult.shape[0],) + mult.shape[1:])
        arr[lo:] = w
        return np.fft.rfft(arr, n=n_pad, axis=0) * np.fft.rfft(self.taps, n=n_pad)[:, None]

    def _pad_for(self, *kernels) -> int:
        need = max(lo + m.shape[0] for m, lo in kernels) + len(self.taps) + 1
        return 1 << int(np.ceil(np.log2(need)))

    def cross(self, mult1: np.ndarray, lo1: int, mult2: np.ndarray, lo2: int) -> float:
        """< (K1 * Xi)(x) (K2 * Xi)(x) > for two kernels given as (slices,
        modes) arrays of their time-sliced spectral multipliers starting at
        absolute slice indices lo1, lo2.  Uses the identity
        sum_(j,j') g1_j g2_j' A(j - j') = sum_t (g1 conv taps)(g2 conv taps)
        evaluated by Parseval."""
        n_pad = self._pad_for((mult1, lo1), (mult2, lo2))
        H1 = self._tap_smoothed(mult1, lo1, n_pad)
        H2 = self._tap_smoothed(mult2, lo2, n_pad)
        # Parseval for rfft: sum_t h1 h2 = (H[0] + 2 sum_mid + edge) / n_pad
        prod = (H1.conj() * H2).real
        val = 2.0 * prod.sum(axis=0) - prod[0]
        if n_pad % 2 == 0:
            val -= prod[-1]
        val /= n_pad
        return float(self.prefactor * np.sum(self.mhat2 * val))

    def _fluct_mult(self, mu: float) -> tuple:
        dt = self.spec.dt
        hi = int(np.ceil(2.0 * mu / dt))
        t = dt * np.arange(hi + 1)
        w = 1.0 - chi(t / mu)
        return w[:, None] * np.exp(-np.outer(t, self.k_sigma)), 0

    def _dot_mult(self, mu: float) -> tuple:
        dt = self.spec.dt
        lo = int(np.floor(mu / dt))
        hi = int(np.ceil(2.0 * mu / dt))
        t = dt * np.arange(lo, hi + 1)
        w = -(t / mu**2) * chi_prime(t / mu)
        return w[:, None] * np.exp(-np.outer(t, self.k_sigma)), lo

    def tadpole(self, mu: float) -> float:
        """C(mu) = < ((G - G_mu) * Xi)(x)^2 >."""
        m, lo = self._fluct_mult(mu)
        return self.cross(m, lo, m, lo)

    def tadpole_derivative_half(self, mu: float) -> float:
        """D(mu) = < ((G - G_mu) * Xi) ((dG_mu) * Xi) > = -C'(mu)/2."""
        m1, lo1 = self._fluct_mult(mu)
        m2, lo2 = self._dot_mult(mu)
        return self.cross(m1, lo1, m2, lo2)

    def noise_covariance(self, t_lag: int = 0, x_lag=0) -> float:
        """< Xi(x) Xi(x + lag) > with the lag in grid units."""
        spec = self.spec
        off = self.acorr_offset
        if abs(t_lag) > off:
            return 0.0
        phase = np.ones(spec.n**spec.d)
        if np.any(np.atleast_1d(x_lag)):
            grids = spec.freq_grids()
            ph = np.zeros(spec.space_shape())
            for axis, sh in enumerate(np.atleast_1d(x_lag)):
                ph = ph + grids[axis] * (sh * spec.dx)
            phase = np.cos(ph).ravel()
        a = self.acorr[t_lag + off]
        return float(
            spec.dt / spec.dx**spec.d * a * np.mean(self.mhat2 * phase)
        )

    def covariance_kernel(self, n_lags: int) -> np.ndarray:
        """P(t_lag, x) = < (Ghat_1 * Xi)(0) (Ghat_1 * Xi)(t_lag, x) > for
        t_lag = 0..n_lags-1, as real-space slices (used by the sunset
        integrals)."""
        m, lo = self._fluct_mult(1.0)
        T = m.shape[0]
        n_pad = 1 << int(np.ceil(np.log2(2 * (T + len(self.taps) + n_lags))))
        H = self._tap_smoothed(m, lo, n_pad)
        auto = np.fft.irfft(np.abs(H) ** 2, n=n_pad, axis=0)
        out_hat = auto[:n_lags] * (self.prefactor * self.mhat2[None])
        # back to real space per time lag
        shape = (n_lags, *self.spec.space_shape())
        field_hat = (out_hat * self.spec.n**self.spec.d).reshape(shape).astype(complex)
        return np.fft.ifftn(field_hat, axes=tuple(range(1, self.spec.d + 1))).real


def pairing_count(m: int, k: int) -> int:
    """Number of ways to Wick-contract k pairs out of m slots:
    m! / ((m - 2k)! k! 2^k)."""
    return math.factorial(m) // (math.factorial(m - 2 * k) * math.factorial(k) * 2**k)


# -- expectation flow and renormalization ---------------------------------


@dataclass
class EffectiveCoefficients:
    i_max: int
    mu_grid: np.ndarray
    pathwise: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)  # (i,m,a) -> (mu_nodes, values)


@dataclass
class CounterTermResult:
    nu: float
    entries: dict  # (i, m, a) -> value
    provenance: dict  # (i, m, a) -> "flow_integrated" | "oracle"
    diagnostics: dict

    def as_dict(self) -> dict:
        return dict(self.entries)


def _octave_nodes(j_levels: int, nodes_per_octave: int):
    """Gauss-Legendre nodes and weights on each octave (2^-j-1, 2^-j],
    finest octave extended down to 0."""
    x, w = np.polynomial.legendre.leggauss(nodes_per_octave)
    nodes, weights = [], []
    for j in range(j_levels):
        hi = 2.0**-j
        lo = 2.0 ** -(j + 1)
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def tadpole_oracle(spec: LatticeSpec, noise_model: NoiseModel, mu: float = 1.0) -> float:
    """Independent Wick evaluation of C(mu) = <((G - G_mu) * Xi)^2>."""
    return WickCalculator(spec, noise_model).tadpole(mu)


def flow_expected(
    model: ModelSpec,
    spec: LatticeSpec,
    nu: float,
    scheme: RenormScheme,
    j_levels: int = 10,
    nodes_per_octave: int = 16,
    i_max: int = 2,
) -> tuple:
    """Integrate the expectation flow on a geometric mu-grid and return the
    stored curves plus the counterterms for every relevant index.

    Supported index classes at this truncation:
      (1, m0, 0): first-order flow, closed on the tadpole curve C(mu); the
          source terms are the declared monomials (1, m, 0) with m > m0 and
          m - m0 even, each contracted (m - m0)/2 times.
      (2, 1, 0): closed sunset form for the cubic-plus-linear Z2 class.
    Anything else faults: the stored-kernel truncation (m <= 2 translation
    invariant) does not determine it.
    """
    noise_model = (model.noise or NoiseModel("mollified_white", 1.0, 0)).with_nu(nu)
    wick = WickCalculator(spec, noise_model)
    anchors = scheme.as_dict()
    relevant = relevant_filtered(model)
    for key in anchors:
        if key not in relevant:
            raise ValidationFault(f"anchor for non-relevant index {key}")
    over = [key for key in relevant if key[0] > i_max]
    if over:
        raise ValidationFault(
            f"truncation order {i_max} cannot determine relevant indices {over}"
        )

    nodes, weights = _octave_nodes(j_levels, nodes_per_octave)
    mu_min = 2.0**-j_levels
    C_nodes = np.array([wick.tadpole(mu) for mu in nodes])
    D_nodes = np.array([wick.tadpole_derivative_half(mu) for mu in nodes])
    C_min = wick.tadpole(mu_min)
    C_one = wick.tadpole(1.0)

    # bare (mu = 0) values of the declared monomials
    def bare(i, m):
        for mo in model.monomials:
            if mo.i == i and mo.m == m and mo.degree() == 0:
                return coefficient_value(model, mo, nu)
        return 0.0

    entries, provenance, curves = {}, {}, {}
    arities = sorted({mo.m for mo in model.monomials if mo.i == 1 and mo.degree() == 0})
    quad_errors = {}
    sunset_diag = {}

    for key in relevant:
        i, m, a = key
        if i == 1 and all(sum(aq) == 0 for aq in a):
            # contraction sources: monomials (1, mm, 0) feeding (1, m, 0)
            # by contracting k = (mm - m)/2 Wick pairs
            sources = [
                (mm, bare(1, mm), (mm - m) // 2)
                for mm in arities
                if mm > m and (mm - m) % 2 == 0
            ]
            anchor = anchors.get(key, 0.0)
            # flow integral of d<f>/dmu = sum_mm c kappa * d/dmu C(mu)^k,
            # with dC/dmu = -2 D(mu); the cell [0, mu_min] contributes its
            # exact boundary increment C(mu_min)^k (C is continuous at 0)
            flow_int = 0.0
            for mm, c_m, k in sources:
                kap = pairing_count(mm, k)
                dint = np.sum(weights * k * C_nodes ** (k - 1) * (-2.0) * D_nodes)
                flow_int += c_m * kap * (dint + C_min**k)
            entries[key] = anchor - flow_int
            provenance[key] = "flow_integrated"
            # quadrature error: the mu-integral telescopes exactly to C(1)^k
            # in the discrete Wick calculus, so the defect is pure quadrature
            exact_int = sum(
                c_m * pairing_count(mm, k) * C_one**k for mm, c_m, k in sources
            )
            quad_errors[key] = abs(flow_int - exact_int)
            # stored curve <f_mu> = f_nu + sum kappa c C(mu)^k
            curve = entries[key] + sum(
                c_m * pairing_count(mm, k) * C_nodes**k for mm, c_m, k in sources
            )
            curves[key] = (nodes.copy(), np.broadcast_to(curve, nodes.shape).copy())
        elif (i, m) == (2, 1) and all(sum(aq) == 0 for aq in a):
            entries[key], sunset_diag = _sunset_counterterm(
                model, spec, nu, anchors, wick, key
            )
            provenance[key] = "oracle"
            curves[key] = (np.array([1.0]), np.array([anchors.get(key, 0.0)]))
        else:
            raise ValidationFault(
                f"effective flow truncation does not cover relevant index {key}"
            )

    diagnostics = {
        "tadpole_C1": C_one,
        "tadpole_Cmin": C_min,
        "sunset": sunset_diag,
        "mu_levels": j_levels,
        "nodes_per_octave": nodes_per_octave,
        "quad_error": quad_errors,
    }
    coeffs = EffectiveCoefficients(
        i_max=max((k[0] for k in entries), default=1),
        mu_grid=mu_grid_geometric(j_levels),
        expected=curves,
    )
    result = CounterTermResult(nu=nu, entries=entries, provenance=provenance, diagnostics=diagnostics)
    return coeffs, result


def _sunset_counterterm(model, spec, nu, anchors, wick, key):
    """Second-order (2,1,0) counterterm for the cubic(+linear) Z2 class.

    With u = phi + Ghat_1 * F_1[phi], the order-lambda^2 linear-in-phi part
    of <F_1[phi]> reduces, after the Wick contractions and the cancellation
    (f1 + 3 c T)^2 = anchor1^2, to

        f2 = anchor2 - anchor1^2 I_G - 6 c anchor1 I_GP - 18 c^2 I_GP2,

    where I_G = int Ghat_1, I_GP = int Ghat_1 P, I_GP2 = int Ghat_1 P^2 and
    P is the covariance kernel of Ghat_1 * Xi.
    """
    cubic = [mo for mo in model.monomials if (mo.i, mo.m) == (1, 3) and mo.degree() == 0]
    others = [
        mo
        for mo in model.monomials
        if not ((mo.i, mo.m) in ((1, 3), (1, 1)) and mo.degree() == 0)
    ]
    if others:
        raise ValidationFault(
            "sunset counterterm implemented only for the cubic(+linear) Z2 class"
        )
    if (1, 3, tuple((((0,) * model.d),) * 3)) in anchors:
        c = anchors[(1, 3, tuple((((0,) * model.d),) * 3))]
    elif cubic:
        c = coefficient_value(model, cubic[0], nu)
    else:
        c = 0.0
    a1_key = (1, 1, ((0,) * model.d,))
    anchor1 = anchors.get(a1_key, 0.0)
    anchor2 = anchors.get(key, 0.0)

    n_lags = min(int(np.ceil(2.0 / spec.dt)) + 1, spec.nt)
    P = wick.covariance_kernel(n_lags)
    t = spec.dt * np.arange(n_lags)
    w_np = 1.0 - chi(t)
    ghat_hat = w_np[:, None] * np.exp(-np.outer(t, wick.k_sigma))
    shape = (n_lags, *spec.space_shape())
    ghat = np.fft.ifftn(
        ghat_hat.reshape(shape).astype(complex) * 1.0, axes=tuple(range(1, spec.d + 1))
    ).real * (1.0 / spec.dx**spec.d)
    w_t = np.full(n_lags, spec.dt)
    w_t[0] *= 0.5
    vol = spec.dx**spec.d
    I_G = float(np.sum(w_t[:, None] * ghat.reshape(n_lags, -1)) * vol)
    I_GP = float(np.sum(w_t[:, None] * (ghat * P).reshape(n_lags, -1)) * vol)
    I_GP2 = float(np.sum(w_t[:, None] * (ghat * P**2).reshape(n_lags, -1)) * vol)
    value = anchor2 - anchor1**2 * I_G - 6.0 * c * anchor1 * I_GP - 18.0 * c**2 * I_GP2
    return value, {"I_G": I_G, "I_GP": I_GP, "I_GP2": I_GP2}


# -- contraction maps ------------------------------------------------------


@dataclass
class CoefKernel:
    """Translation-invariant coefficient kernel with m slots, stored over
    difference variables: array with one (space-time) axis pair per slot,
    flattened to a point index of size nt * n^d per slot."""

    spec: LatticeSpec
    data: np.ndarray  # shape (P,) * arity with P = nt * n^d
    arity: int

    def volume(self) -> float:
        return self.spec.dt * self.spec.dx**self.spec.d

    def norm(self) -> float:
        """Grid analogue of the kernel norm: total mass of the modulus."""
        return float(np.sum(np.abs(self.data)) * self.volume() ** self.arity)


def _difference_table(spec: LatticeSpec) -> np.ndarray:
    """diff[p, q] = index of the group difference p - q on the space-time
    grid (time periodic by convention of the small test fixtures)."""
    nt, n, d = spec.nt, spec.n, spec.d
    P = nt * n**d
    idx = np.arange(P)
    coords = np.unravel_index(idx, (nt, *([n] * d)))
    out = np.empty((P, P), dtype=np.intp)
    for q in range(P):
        cq = [c[q] for c in coords]
        diff = [
            (coords[axis] - cq[axis]) % (nt if axis == 0 else n)
            for axis in range(d + 1)
        ]
        out[:, q] = np.ravel_multi_index(diff, (nt, *([n] * d)))
    return out


def contract_B(G: np.ndarray, W: CoefKernel, U: CoefKernel) -> CoefKernel:
    """Discrete trilinear contraction: the distinguished (first) slot of W
    is integrated against G(y - x2), with U anchored at x2:

        B(G, W, U)[z_W, z_U] = sum_(x2, y) W[y, z_W] G[y - x2] U[z_U - x2]
                               * vol^2.
    """
    spec = W.spec
    g = np.asarray(G, dtype=float).ravel()
    P = g.size
    if W.data.shape[0] != P:
        raise ValidationFault("contraction arity mismatch: G and W grids differ")
    diff = _difference_table(spec)
    vol = W.volume()
    # H[y, z_U...] = sum_(x2) G[y - x2] U[z_U - x2]
    U_flat = U.data.reshape((P,) * U.arity) if U.arity else U.data.reshape(())
    H = np.zeros((P,) + (P,) * U.arity)
    for x2 in range(P):
        gcol = g[diff[:, x2]]
        if U.arity == 0:
            H += gcol * float(U_flat)
        elif U.arity == 1:
            H += np.multiply.outer(gcol, U_flat[diff[:, x2]])
        else:
            H += np.multiply.outer(gcol, U_flat[np.ix_(*([diff[:, x2]] * U.arity))])
    out = np.tensordot(W.data, H, axes=([0], [0])) * vol**2
    return CoefKernel(spec, out, W.arity - 1 + U.arity)


def contract_A(G: np.ndarray, V: CoefKernel) -> CoefKernel:
    """Discrete bilinear cumulant contraction: V carries a second base point
    (first axis) and a distinguished slot (second axis); both are integrated
    out against G(y - x2):

        A(G, V)[rest] = sum_(x2, y) V[x2, y, rest] G[y - x2] * vol^2.
    """
    spec = V.spec
    g = np.asarray(G, dtype=float).ravel()
    P = g.size
    if V.arity < 2 or V.data.shape[0] != P:
        raise ValidationFault("contraction arity mismatch: A needs base + slot axes")
    diff = _difference_table(spec)
    vol = V.volume()
    gmat = g[diff].T  # gmat[x2, y] = G[y - x2]
    out = np.einsum("xy,xy...->...", gmat, V.data) * vol**2
    return CoefKernel(spec, np.asarray(out), V.arity - 2)


def delta_kernel(spec: LatticeSpec) -> np.ndarray:
    """Discrete delta on the space-time grid: mass 1 at the origin cell."""
    P = spec.nt * spec.n**spec.d
    g = np.zeros(P)
    g[0] = 1.0 / (spec.dt * spec.dx**spec.d)
    return g


# -- Taylor maps -----------------------------------------------------------


def lift_L(spec: LatticeSpec, v: float, m: int) -> CoefKernel:
    """L^m v for a constant v: v times the product of slot deltas at the
    base point."""
    P = spec.nt * spec.n**spec.d
    vol = spec.dt * spec.dx**spec.d
    if m == 0:
        return CoefKernel(spec, np.asarray(v, dtype=float), 0)
    data = np.zeros((P,) * m)
    data[(0,) * m] = v / vol**m
    return CoefKernel(spec, data, m)


def integrate_I(V: CoefKernel) -> float:
    """I V = total mass over all slot variables."""
    return float(np.sum(V.data) * V.volume() ** V.arity)


def _slot_offsets(spec: LatticeSpec) -> list:
    """Per grid point: the space-time offset (t, x_1..x_d) with space
    wrapped to [-pi, pi) and time to [-T/2, T/2) (fixtures centered)."""
    nt, n, d = spec.nt, spec.n, spec.d
    t = spec.dt * np.arange(nt)
    half = spec.dt * nt / 2.0
    t = (t + half) % (spec.dt * nt) - half
    x = spec.dx * np.arange(n)
    x = (x + np.pi) % (2 * np.pi) - np.pi
    grids = np.meshgrid(t, *([x] * d), indexing="ij")
    return [g.ravel() for g in grids]


def moment_weight(spec: LatticeSpec, a: tuple) -> np.ndarray:
    """X^a weight z^a / a! over one slot's flattened points; a is a
    space-time multi-index (a_time, a_x1, ..)."""
    offs = _slot_offsets(spec)
    out = np.ones_like(offs[0])
    for axis, deg in enumerate(a):
        if deg:
            out = out * offs[axis] ** deg / math.factorial(deg)
    return out


def apply_moment(V: CoefKernel, a_list) -> CoefKernel:
    """X^(m,a) V: multiply slot q by z_q^(a_q) / a_q!."""
    if len(a_list) != V.arity:
        raise ValidationFault("moment index list does not match kernel arity")
    data = V.data.copy()
    for q, aq in enumerate(a_list):
        w = moment_weight(V.spec, aq)
        shape = [1] * V.arity
        shape[q] = w.size
        data = data * w.reshape(shape)
    return CoefKernel(V.spec, data, V.arity)


def slot_derivative(V: CoefKernel, b_list) -> CoefKernel:
    """partial^b V: spectral derivative in each slot's space-time variables
    (fixtures periodic in both axes)."""
    spec = V.spec
    nt, n, d = spec.nt, spec.n, spec.d
    data = V.data.reshape(((nt,) + (n,) * d) * V.arity).astype(complex)
    kt = 2j * np.pi * np.fft.fftfreq(nt, d=spec.dt)
    kx = 1j * np.fft.fftfreq(n, d=1.0 / n)
    naxes = 1 + d
    for q, bq in enumerate(b_list):
        for axis, deg in enumerate(bq):
            if not deg:
                continue
            ax = q * naxes + axis
            data = np.fft.fft(data, axis=ax)
            mult = (kt if axis == 0 else kx) ** deg
            shape = [1] * data.ndim
            shape[ax] = mult.size
            data = data * mult.reshape(shape)
            data = np.fft.ifft(data, axis=ax)
    data = data.real.reshape(V.data.shape)
    return CoefKernel(spec, data, V.arity)


def scale_Z(V: CoefKernel, tau: float) -> CoefKernel:
    """Z_tau V: slot variables scaled by 1/tau with the Jacobian factor
    tau^(-(1+d) m), evaluated by trigonometric interpolation per axis."""
    spec = V.spec
    if V.arity != 1:
        raise ValidationFault("Z_tau implemented for arity-1 kernels")
    nt, n, d = spec.nt, spec.n, spec.d
    data = V.data.reshape((nt,) + (n,) * d).astype(complex)

    def axis_matrix(npts: int, step: float, periods: float) -> np.ndarray:
        k = np.fft.fftfreq(npts, d=1.0 / npts)  # integer frequencies
        z = step * np.arange(npts)
        half = step * npts / 2.0
        zc = (z + half) % (step * npts) - half
        A = np.exp(2j * np.pi * np.outer(zc / tau, k) / (step * npts)) / npts
        # the kernel is compactly supported inside the fundamental domain:
        # evaluation points z/tau that leave it must read 0, not the
        # periodic extension (which would alias contracted copies back in)
        A[np.abs(zc / tau) > half] = 0.0
        return A

    A_t = axis_matrix(nt, spec.dt, 1.0)
    A_x = axis_matrix(n, spec.dx, 1.0)
    out = np.fft.fft(data, axis=0)
    out = np.tensordot(A_t, out, axes=([1], [0]))
    for axis in range(1, d + 1):
        out = np.fft.fft(out, axis=axis)
        out = np.moveaxis(
            np.tensordot(A_x, np.moveaxis(out, axis, 0), axes=([1], [0])), 0, axis
        )
    out = out.real * tau ** (-(1 + d))
    return CoefKernel(spec, out.reshape(V.data.shape), 1)


def _st_indices(d: int, max_order: int):
    """Space-time multi-indices (a_t, a_x1..a_xd) with total order <=
    max_order."""
    out = []
    for total in range(max_order + 1):
        for combo in itertools.product(range(total + 1), repeat=d + 1):
            if sum(combo) == total:
                out.append(combo)
    return out


def taylor_remainder(
    v_low: dict, V_high: dict, a: tuple, l: int, n_tau: int = 8
) -> CoefKernel:
    """X^a_l map: reconstruct X^(1,a) V from the integrated low-order
    moments v^b (|b| < l) and the order-l moment kernels V^b (|b| = l).

        X^a_l = sum_(|a+b|<l) (-1)^|b| C(a+b,a) partial^b L(v^(a+b))
              + sum_(|a+b|=l) |b| (-1)^|b| C(a+b,a)
                  int_0^1 (1-tau)^(|b|-1) partial^b Z_tau(V^(a+b)) dtau.
    """
    if sum(a) >= l:
        raise ValidationFault(f"need |a| < l, got |a| = {sum(a)}, l = {l}")
    some = next(iter(V_high.values()))
    spec = some.spec
    d = spec.d

    def binom(ab, aa):
        return int(
            np.prod([math.comb(ab[j], aa[j]) for j in range(len(ab))])
        )

    acc = CoefKernel(spec, np.zeros_like(some.data), 1)
    for b in _st_indices(d, l):
        ab = tuple(a[j] + b[j] for j in range(d + 1))
        if sum(ab) < l:
            if ab not in v_low:
                continue
            term = lift_L(spec, v_low[ab], 1)
            term = slot_derivative(term, [b])
            coef = (-1.0) ** sum(b) * binom(ab, a)
            acc = CoefKernel(spec, acc.data + coef * term.data, 1)
        elif sum(ab) == l and sum(b) > 0:
            if ab not in V_high:
                continue
            x, w = np.polynomial.legendre.leggauss(n_tau)
            tau_nodes = 0.5 * (x + 1.0)
            tau_w = 0.5 * w
            integ = np.zeros_like(some.data)
            for tn, tw in zip(tau_nodes, tau_w):
                zt = scale_Z(V_high[ab], tn)
                zt = slot_derivative(zt, [b])
                integ += tw * (1.0 - tn) ** (sum(b) - 1) * zt.data
            coef = sum(b) * (-1.0) ** sum(b) * binom(ab, a)
            acc = CoefKernel(spec, acc.data + coef * integ, 1)
    return acc


def slot_smooth(V: CoefKernel, width_t: float, width_x: float) -> CoefKernel:
    """Convolve an arity-1 kernel with a fixed smooth window (periodized
    Gaussian) in its slot variable.  Both sides of the reconstruction
    identity contain point masses and their derivatives, so they coincide
    only after pairing with a smooth function; this realizes that pairing
    at every base offset at once."""
    if V.arity != 1:
        raise ValidationFault("slot_smooth implemented for arity-1 kernels")
    spec = V.spec
    nt, n, d = spec.nt, spec.n, spec.d
    offs = _slot_offsets(spec)
    arg = (offs[0] / width_t) ** 2
    for axis in range(1, d + 1):
        arg = arg + (offs[axis] / width_x) ** 2
    window = np.exp(-arg).reshape((nt,) + (n,) * d)
    window /= np.sum(window) * spec.dt * spec.dx**d
    data = V.data.reshape((nt,) + (n,) * d)
    out = np.fft.ifftn(np.fft.fftn(data) * np.fft.fftn(window)).real
    out *= spec.dt * spec.dx**d
    return CoefKernel(spec, out.reshape(V.data.shape), 1)


def _gauss_window_deriv(u: np.ndarray, width: float, period: float, order: int):
    """order-th derivative of the periodized Gaussian window
    sum_m exp(-((u + m*period)/width)^2), for orders 0..3."""
    out = np.zeros_like(u, dtype=float)
    w2 = width * width
    for m in range(-3, 4):
        v = u + m * period
        g = np.exp(-v * v / w2)
        if order == 0:
            out += g
        elif order == 1:
            out += -2.0 * v / w2 * g
        elif order == 2:
            out += (-2.0 / w2 + 4.0 * v * v / w2**2) * g
        elif order == 3:
            out += (12.0 * v / w2**2 - 8.0 * v**3 / w2**3) * g
        else:
            raise ValidationFault("window derivatives implemented up to order 3")
    return out


def taylor_decompose(
    V: CoefKernel,
    a: tuple,
    l: int,
    n_tau: int = 8,
    width_t: float | None = None,
    width_x: float | None = None,
) -> dict:
    """Evaluate both sides of the Taylor reconstruction identity for an
    arity-1 kernel: X^(1,a) V versus X^a_l(I(X^b V), X^b V).

    The reconstruction is a distributional identity (the low-order terms
    are derivatives of point masses), so both sides are paired with a fixed
    smooth window phi.  The pairing is evaluated in closed form:
    (d^b L(v)) * phi = v d^b phi and (d^b Z_tau W) * phi =
    int W(v) (d^b phi)(z - tau v) dv, so the tau-contracted kernels never
    have to be represented on the grid.  max_error is the max-norm
    discrepancy of the two smoothed sides."""
    if V.arity != 1:
        raise ValidationFault("taylor_decompose implemented for arity-1 kernels")
    spec = V.spec
    d = spec.d
    if d != 1:
        raise ValidationFault("taylor_decompose implemented for d = 1")
    nt, n = spec.nt, spec.n
    T = spec.dt * nt
    if width_t is None:
        width_t = 0.2 * T
    if width_x is None:
        width_x = 0.2 * TORUS_LEN
    vol = spec.dt * spec.dx

    t_off, x_off = _slot_offsets(spec)
    t_c = t_off[:: spec.n]  # centered time offsets, one per slice
    x_c = x_off[:n]  # centered spatial offsets

    def smoothed_transport(W: np.ndarray, b: tuple, tau: float) -> np.ndarray:
        """sum_v W(v) (d^b phi)(z - tau v) vol over the grid of z."""
        Mt = _gauss_window_deriv(t_c[:, None] - tau * t_c[None, :], width_t, T, b[0])
        Mx = _gauss_window_deriv(x_c[:, None] - tau * x_c[None, :], width_x, TORUS_LEN, b[1])
        return (Mt @ W.reshape(nt, n) @ Mx.T) * vol

    v_low, V_high = {}, {}
    for b in _st_indices(d, l):
        Xb = apply_moment(V, [b])
        if sum(b) < l:
            v_low[b] = integrate_I(Xb)
        elif sum(b) == l:
            V_high[b] = Xb

    direct = smoothed_transport(apply_moment(V, [a]).data, (0, 0), 1.0)

    def binom(ab, aa):
        return int(np.prod([math.comb(ab[j], aa[j]) for j in range(len(ab))]))

    recon = np.zeros((nt, n))
    for b in _st_indices(d, l):
        ab = tuple(a[j] + b[j] for j in range(d + 1))
        if sum(ab) < l:
            if ab not in v_low:
                continue
            dphi_t = _gauss_window_deriv(t_c, width_t, T, b[0])
            dphi_x = _gauss_window_deriv(x_c, width_x, TORUS_LEN, b[1])
            coef = (-1.0) ** sum(b) * binom(ab, a)
            recon += coef * v_low[ab] * np.outer(dphi_t, dphi_x)
        elif sum(ab) == l and sum(b) > 0:
            if ab not in V_high:
                continue
            xg, wg = np.polynomial.legendre.leggauss(n_tau)
            tau_nodes = 0.5 * (xg + 1.0)
            tau_w = 0.5 * wg
            integ = np.zeros((nt, n))
            for tn, tw in zip(tau_nodes, tau_w):
                integ += tw * (1.0 - tn) ** (sum(b) - 1) * smoothed_transport(
                    V_high[ab].data, b, tn
                )
            coef = sum(b) * (-1.0) ** sum(b) * binom(ab, a)
            recon += coef * integ
    return {
        "direct": CoefKernel(spec, direct.ravel(), 1),
        "reconstructed": CoefKernel(spec, recon.ravel(), 1),
        "max_error": float(np.max(np.abs(direct - recon))),
        "moments": v_low,
    }
