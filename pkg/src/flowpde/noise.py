"""Microscopic noise families and their macroscopic rescaling.

A microscopic noise Xi is stationary, centered, smooth, with unit covariance
integral and finite dependence range.  Its macroscopic counterpart is

    bold-Xi_nu(x) = [nu]^(-dim(Xi)) Xi(x0/nu, xbar/[nu]),   [nu] = nu^(1/sigma).

For mollified white noise Xi = M * W this is equivalent in law to convolving
a macroscopic space-time white noise with the L1-normalized rescaled
mollifier nu^(-1) [nu]^(-d) M(x0/nu, xbar/[nu]).  We generate the white noise
once per (master_seed, sample_index) substream, so every nu and every
mollifier family in an experiment is driven by the same realization: the
coupling used in the nu -> 0 comparisons, and a large variance reduction.

Shot noise is a homogeneous Poisson cloud with a zero-mean kernel; couplings
across nu share the leading uniform points of the substream (a thinning).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationFault
from .lattice import SPACE_TIME, Field, LatticeSpec

MOLLIFIER_FAMILIES = ("bump", "skew")


def substream(master_seed: int, sample_index: int, label: str) -> np.random.Generator:
    """Counter-based substream: schedule-independent, collision-resistant."""
    digest = hashlib.blake2b(
        f"{master_seed}:{sample_index}:{label}".encode(), digest_size=16
    ).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


# -- mollifier profiles (microscopic units, support radius <= 1/2) ---------


def _bump(u: np.ndarray, half_width: float) -> np.ndarray:
    """Smooth bump supported on |u| < half_width, unnormalized."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    s = np.abs(u) / half_width
    inside = s < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


class MollifierProfile:
    """Separable mollifier M(s, x) = m_t(s) prod_j m_x(x_j), normalized so
    that the temporal integral and each spatial integral equal 1.  The
    temporal profile is causal (supported in s in (0, 1/2))."""

    def __init__(self, family: str):
        if family not in MOLLIFIER_FAMILIES:
            raise ValidationFault(f"unknown mollifier family {family!r}")
        self.family = family
        self._fine = np.linspace(-0.5, 0.5, 4097)
        self._du = self._fine[1] - self._fine[0]

    def temporal_raw(self, s):
        # causal: supported in (0, 1/2)
        s = np.asarray(s, dtype=float)
        if self.family == "bump":
            return _bump(s - 0.25, 0.25)
        return _bump(s - 0.15, 0.15) + 0.5 * _bump(s - 0.35, 0.15)

    def temporal(self, s) -> np.ndarray:
        fine = self._fine + 0.5  # quadrature grid covering (0, 1)
        norm = np.sum(self.temporal_raw(fine)) * self._du
        return self.temporal_raw(s) / norm

    def spatial_raw(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "bump":
            return _bump(x, 0.5)
        return _bump(x - 0.1, 0.4) + 0.6 * _bump(x + 0.25, 0.2)

    def spatial(self, x) -> np.ndarray:
        norm = np.sum(self.spatial_raw(self._fine)) * self._du
        return self.spatial_raw(x) / norm

    def spatial_hat(self, xi: np.ndarray) -> np.ndarray:
        """Continuous Fourier transform of the normalized spatial profile at
        frequencies xi; exact to quadrature error (profile is smooth and
        compactly supported).  spatial_hat(0) = 1."""
        vals = self.spatial(self._fine)
        phase = np.exp(-1j * np.multiply.outer(xi, self._fine))
        return phase @ vals * self._du


@dataclass(frozen=True)
class NoiseModel:
    kind: str  # "mollified_white" | "poisson_shot"
    nu: float
    master_seed: int
    family: str = "bump"
    rate: float = 40.0  # poisson_shot intensity (microscopic units)
    resolution_policy: str = "strict"  # "strict" | "spectral"

    def __post_init__(self):
        if self.kind not in ("mollified_white", "poisson_shot"):
            raise ValidationFault(f"unknown noise kind {self.kind!r}")
        if not (0.0 < self.nu <= 1.0):
            raise ValidationFault(f"nu must lie in (0, 1], got {self.nu}")
        if self.resolution_policy not in ("strict", "spectral"):
            raise ValidationFault(f"unknown resolution_policy {self.resolution_policy!r}")
        object.__setattr__(self, "nu", float(self.nu))

    def profile(self) -> MollifierProfile:
        return MollifierProfile(self.family)

    def with_nu(self, nu: float) -> "NoiseModel":
        return NoiseModel(
            self.kind, nu, self.master_seed, self.family, self.rate, self.resolution_policy
        )


def _check_resolution(model: NoiseModel, spec: LatticeSpec):
    lam = model.nu ** (1.0 / spec.sigma)
    if model.resolution_policy == "spectral":
        return
    if spec.dx > lam / 4.0 + 1e-12:
        raise ValidationFault(
            f"lattice under-resolves mollification scale: need dx <= [nu]/4 = "
            f"{lam / 4.0:.6g}, have dx = {spec.dx:.6g}"
        )
    if spec.dt > model.nu / 4.0 + 1e-12:
        raise ValidationFault(
            f"lattice under-resolves mollification scale: need dt <= nu/4 = "
            f"{model.nu / 4.0:.6g}, have dt = {spec.dt:.6g}"
        )


def extended_window(spec: LatticeSpec, history: float) -> LatticeSpec:
    """The sampling window enlarged backward so kernels supported in [0, 2]
    (times any truncation depth) act on the interior without edge effects."""
    if history <= 0:
        return spec
    pad = int(np.ceil(history / spec.dt)) * spec.dt
    return spec.with_window(spec.t_min - pad, spec.t_max)


def white_noise_slab(spec: LatticeSpec, rng: np.random.Generator) -> np.ndarray:
    """Discrete space-time white noise: iid N(0, 1/(dt dx^d)) per cell."""
    scale = 1.0 / np.sqrt(spec.dt * spec.dx**spec.d)
    return rng.standard_normal((spec.nt, *spec.space_shape())) * scale


def sample_macroscopic_noise(
    model: NoiseModel,
    spec: LatticeSpec,
    sample_index: int,
    history: float = 0.0,
) -> Field:
    """One reproducible sample of bold-Xi_nu on the (possibly extended)
    lattice window."""
    _check_resolution(model, spec)
    ext = extended_window(spec, history)
    if model.kind == "mollified_white":
        return _sample_mollified_white(model, ext, sample_index)
    return _sample_poisson_shot(model, ext, sample_index)


def _temporal_taps(model: NoiseModel, spec: LatticeSpec) -> np.ndarray:
    """Causal taps of the rescaled temporal profile m_t(s/nu)/nu, normalized
    so the discrete integral is exactly 1 (the grid realization of the
    unit-mass condition)."""
    prof = model.profile()
    n_tap = max(int(np.ceil(0.5 * model.nu / spec.dt)) + 1, 1)
    s = spec.dt * np.arange(n_tap)
    taps = prof.temporal(s / model.nu) / model.nu
    total = taps.sum() * spec.dt
    if total <= 0:
        # under-resolved in time: collapse to a single tap of unit mass
        taps = np.zeros(n_tap)
        taps[0] = 1.0 / spec.dt
        return taps
    return taps / (total)


def _spatial_multiplier(model: NoiseModel, spec: LatticeSpec) -> np.ndarray:
    prof = model.profile()
    lam = model.nu ** (1.0 / spec.sigma)
    k = spec.axis_freqs()
    hat1d = prof.spatial_hat(lam * k)
    mult = hat1d
    for _ in range(spec.d - 1):
        mult = np.multiply.outer(mult, hat1d)
    return mult


def _sample_mollified_white(model: NoiseModel, spec: LatticeSpec, sample_index: int) -> Field:
    rng = substream(model.master_seed, sample_index, "white")
    w = white_noise_slab(spec, rng)
    what = np.fft.fftn(w, axes=tuple(range(1, spec.d + 1)))
    what *= _spatial_multiplier(model, spec)[None]
    w = np.fft.ifftn(what, axes=tuple(range(1, spec.d + 1))).real
    taps = _temporal_taps(model, spec)
    # causal temporal convolution via zero-padded FFT along the time axis
    n_pad = 1 << int(np.ceil(np.log2(spec.nt + len(taps))))
    tap_hat = np.fft.fft(taps, n=n_pad)
    w_hat = np.fft.fft(w, n=n_pad, axis=0)
    shape = (n_pad,) + (1,) * spec.d
    out = np.fft.ifft(tap_hat.reshape(shape) * w_hat, axis=0).real[: spec.nt]
    return Field(spec, spec.dt * out, SPACE_TIME)


# -- shot noise ------------------------------------------------------------


def _shot_profiles(prof: MollifierProfile):
    """Zero-mean shot kernel built from two nested bumps: M0 = b1 - alpha b2
    with alpha chosen so the space-time integral vanishes.  Asymmetric in
    value, so odd cumulants survive."""
    fine = prof._fine
    du = prof._du
    t1 = _bump(fine - 0.15, 0.15)
    t2 = _bump(fine - 0.25, 0.25)
    x1 = _bump(fine, 0.25)
    x2 = _bump(fine, 0.5)
    i_t1, i_t2 = t1.sum() * du, t2.sum() * du
    i_x1, i_x2 = x1.sum() * du, x2.sum() * du
    return (t1, t2, x1, x2, i_t1, i_t2, i_x1, i_x2, fine, du)


def shot_kernel_constants(model: NoiseModel, d: int):
    """(alpha, c) with M = c (b1 - alpha b2), alpha enforcing integral 0 and
    c enforcing rate * integral(M^2) = 1."""
    prof = model.profile()
    t1, t2, x1, x2, i_t1, i_t2, i_x1, i_x2, fine, du = _shot_profiles(prof)
    alpha = (i_t1 * i_x1**d) / (i_t2 * i_x2**d)
    # integral of (b1 - alpha b2)^2 over time x space (separable pieces)
    def cross(f, g):
        return np.sum(f * g) * du

    m2 = (
        cross(t1, t1) * cross(x1, x1) ** d
        - 2 * alpha * cross(t1, t2) * cross(x1, x2) ** d
        + alpha**2 * cross(t2, t2) * cross(x2, x2) ** d
    )
    c = 1.0 / np.sqrt(model.rate * m2)
    return alpha, c


def shot_third_cumulant_oracle(model: NoiseModel, d: int) -> float:
    """Closed-form third cumulant at lag 0 of the microscopic shot noise:
    rate * integral(M^3)."""
    if d != 1:
        raise ValidationFault("shot third-cumulant oracle implemented for d = 1")
    prof = model.profile()
    t1, t2, x1, x2, *_rest, fine, du = _shot_profiles(prof)
    alpha, c = shot_kernel_constants(model, d)
    M = c * (np.multiply.outer(t1, x1) - alpha * np.multiply.outer(t2, x2))
    return float(model.rate * np.sum(M**3) * du * du)


def _sample_poisson_shot(model: NoiseModel, spec: LatticeSpec, sample_index: int) -> Field:
    if spec.d != 1:
        raise ValidationFault("poisson_shot sampling implemented for d = 1")
    rng = substream(model.master_seed, sample_index, "shot")
    nu = model.nu
    lam = nu ** (1.0 / spec.sigma)
    window_t = spec.t_max - spec.t_min
    # microscopic volume of the (kernel-padded) macroscopic window
    vol = ((window_t + 0.5 * nu) / nu) * ((2.0 * np.pi) / lam)
    n_pts = rng.poisson(model.rate * vol)
    # uniforms drawn in a fixed order so coarser nu reuse the leading points
    u = rng.random((n_pts, 2))
    t_pts = spec.t_min - 0.5 * nu + u[:, 0] * (window_t + 0.5 * nu)
    x_pts = u[:, 1] * 2.0 * np.pi
    alpha, c = shot_kernel_constants(model, spec.d)
    prof = model.profile()
    amp = lam ** (-(spec.d + spec.sigma) / 2.0)
    out = np.zeros((spec.nt, spec.n))
    times = spec.times()
    xs = spec.dx * np.arange(spec.n)
    half_t = 0.5 * nu
    for tp, xp in zip(t_pts, x_pts):
        j0 = max(int(np.floor((tp - spec.t_min) / spec.dt)), 0)
        j1 = min(int(np.ceil((tp + half_t - spec.t_min) / spec.dt)) + 1, spec.nt)
        if j1 <= j0:
            continue
        s = (times[j0:j1] - tp) / nu
        dx_wrap = (xs - xp + np.pi) % (2.0 * np.pi) - np.pi
        sel = np.abs(dx_wrap) <= 0.5 * lam
        if not sel.any():
            continue
        xr = dx_wrap[sel] / lam
        mt = _bump(s - 0.15, 0.15)
        mt2 = _bump(s - 0.25, 0.25)
        mx = _bump(xr, 0.25)
        mx2 = _bump(xr, 0.5)
        block = c * (np.multiply.outer(mt, mx) - alpha * np.multiply.outer(mt2, mx2))
        out[j0:j1, sel] += amp * block
    return Field(spec, out, SPACE_TIME)


# -- empirical cumulants ---------------------------------------------------


@dataclass
class CumulantEstimate:
    order: int
    lags: list
    values: np.ndarray
    standard_errors: np.ndarray
    samples: int


def _shifted(data: np.ndarray, lag, d: int) -> np.ndarray:
    """Shift a (samples, nt, space...) stack by a space-time lag in grid
    units; time shifts crop, space shifts roll (periodic)."""
    lag = tuple(int(x) for x in np.atleast_1d(lag))
    if len(lag) == d:
        lag = (0, *lag)
    t_sh, sp_sh = lag[0], lag[1:]
    out = data
    for axis, sh in enumerate(sp_sh):
        if sh:
            out = np.roll(out, -sh, axis=2 + axis)
    return out, t_sh


def estimate_cumulants(fields: list, order: int, lags: list) -> CumulantEstimate:
    """Joint cumulant kappa(Xi(x), Xi(x + l_1), ..., Xi(x + l_(order-1))),
    estimated with k-statistics across samples and averaged over the lattice
    (stationarity).  Standard errors by leave-one-out jackknife."""
    if order > 4 or order < 1:
        raise ValidationFault("cumulant order must be in 1..4")
    if len(fields) < max(2, order):
        raise ValidationFault(f"need at least {max(2, order)} samples, got {len(fields)}")
    spec = fields[0].spec
    data = np.stack([f.data for f in fields])  # (N, nt, space...)
    N = data.shape[0]
    vals, errs = [], []
    for lag_set in lags:
        lag_set = _normalize_lagset(lag_set, order, spec.d)
        # crop the common valid time range across all time shifts
        t_shifts = [ls[0] for ls in lag_set]
        lo = -min(min(t_shifts), 0)
        hi = data.shape[1] - max(max(t_shifts), 0)
        cols = []
        for ls in lag_set:
            arr, t_sh = _shifted(data, ls, spec.d)
            cols.append(arr[:, lo + t_sh : hi + t_sh].reshape(N, -1))
        full = _k_statistic(cols, order)
        loo = np.array(
            [
                _k_statistic([np.delete(c, i, axis=0) for c in cols], order)
                for i in range(N)
            ]
        )
        se = np.sqrt((N - 1) / N * np.sum((loo - loo.mean()) ** 2))
        vals.append(full)
        errs.append(se)
    return CumulantEstimate(order, list(lags), np.array(vals), np.array(errs), N)


def _normalize_lagset(lag_set, order: int, d: int):
    """A lag set is (order - 1) space-time lags; the base point has lag 0."""
    lag_set = list(lag_set) if order > 2 else [lag_set] if order == 2 else []
    if order >= 2 and len(lag_set) != order - 1:
        raise ValidationFault(f"order-{order} cumulant needs {order - 1} lags")
    out = [(0,) * (d + 1)]
    for ls in lag_set:
        ls = tuple(int(x) for x in np.atleast_1d(ls))
        if len(ls) == d:
            ls = (0, *ls)
        if len(ls) != d + 1:
            raise ValidationFault(f"lag must have {d} or {d + 1} entries, got {ls}")
        out.append(ls)
    return out


def _k_statistic(cols: list, order: int) -> float:
    """Multivariate k-statistics (unbiased through order 3, standard k4),
    averaged over lattice positions."""
    N = cols[0].shape[0]
    if order > 1 and N < order:
        return float("nan")  # k-statistic of order k needs at least k samples
    cen = [c - c.mean(axis=0, keepdims=True) for c in cols]
    if order == 1:
        return float(cols[0].mean())
    if order == 2:
        return float((cen[0] * cen[1]).sum(axis=0).mean() / (N - 1))
    if order == 3:
        s = (cen[0] * cen[1] * cen[2]).sum(axis=0).mean()
        return float(N * s / ((N - 1) * (N - 2)))
    s4 = (cen[0] * cen[1] * cen[2] * cen[3]).mean(axis=0)
    p12 = (cen[0] * cen[1]).mean(axis=0) * (cen[2] * cen[3]).mean(axis=0)
    p13 = (cen[0] * cen[2]).mean(axis=0) * (cen[1] * cen[3]).mean(axis=0)
    p14 = (cen[0] * cen[3]).mean(axis=0) * (cen[1] * cen[2]).mean(axis=0)
    k4 = (
        N**2
        / ((N - 1) * (N - 2) * (N - 3))
        * ((N + 1) * s4 - (N - 1) * (p12 + p13 + p14))
    )
    return float(k4.mean())


def macroscopic_covariance_multiplier(model: NoiseModel, spec: LatticeSpec) -> np.ndarray:
    """Spatial spectral multiplier of one bold-Xi_nu slice's covariance
    contribution: |m_hat([nu] k)|^2 per spatial mode (mollified_white)."""
    mult = _spatial_multiplier(model, spec)
    return np.abs(mult) ** 2
