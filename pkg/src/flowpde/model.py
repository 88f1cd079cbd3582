"""Declarative force specification and scaling-dimension bookkeeping.

The macroscopic force is

    F_nu[phi] = Xi_nu + sum_(i,m,a) (-1)^|a| lambda^i f^(i,m,a)_nu
                                     d^(a_1) phi ... d^(a_m) phi,

with each a_q a spatial multi-index of degree < sigma (semilinearity).
Scaling exponent of a coefficient:

    rho(i, m, a) = -dim(Xi) + i dim(lambda) + m dim(Phi) + [a],

dim(Phi) = (d - sigma)/2, dim(Xi) = (d + sigma)/2; rho <= 0 is relevant
(requires a renormalization condition), rho > 0 irrelevant (boundary value
prescribed directly, scaling as [nu]^(rho + extra)).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationFault
from .lattice import SPACE_ONLY, SPACE_TIME, Field, forward_transform, inverse_transform

SYMMETRIES = ("none", "parity_z2", "shift_r")


def _norm_index(a, m: int, d: int):
    """Normalize a monomial's derivative list to a tuple of m multi-indices."""
    if a is None or a == 0 or len(a) == 0:
        a = [[0] * d for _ in range(m)]
    a = tuple(tuple(int(x) for x in aq) for aq in a)
    if len(a) != m:
        raise ValidationFault(f"need {m} multi-indices, got {len(a)}")
    for aq in a:
        if len(aq) != d or any(x < 0 for x in aq):
            raise ValidationFault(f"bad spatial multi-index {aq} for d={d}")
    return a


@dataclass(frozen=True)
class Monomial:
    """One force term: order i in lambda, arity m, spatial derivative indices
    a (tuple of m multi-indices), base amplitude, and the extra [nu]-exponent
    used to make irrelevant terms vanish faster."""

    i: int
    m: int
    a: tuple
    base: float = 0.0
    extra_exponent: float = 0.0

    def degree(self) -> int:
        return int(sum(sum(aq) for aq in self.a))


@dataclass(frozen=True)
class ModelSpec:
    d: int
    sigma: float
    dim_lambda: float
    lam: float
    monomials: tuple
    symmetry: str = "none"
    noise: object = None

    def __post_init__(self):
        if self.symmetry not in SYMMETRIES:
            raise ValidationFault(f"unknown symmetry {self.symmetry!r}")
        if self.dim_lambda <= 0:
            raise ValidationFault("outside supported regime: dim(lambda) must be > 0")
        if self.dim_phi < 0:
            raise ValidationFault("outside supported regime: dim(Phi) must be >= 0")
        mono = tuple(
            replace(mo, a=_norm_index(mo.a, mo.m, self.d)) for mo in self.monomials
        )
        object.__setattr__(self, "monomials", mono)
        for mo in mono:
            if mo.i < 1:
                raise ValidationFault("monomial order i must be >= 1")
            for aq in mo.a:
                if sum(aq) >= self.sigma:
                    raise ValidationFault(
                        f"semilinearity violated: |a_q|={sum(aq)} >= sigma={self.sigma}"
                    )

    # -- dimensions -------------------------------------------------------

    @property
    def dim_phi(self) -> float:
        return (self.d - self.sigma) / 2.0

    @property
    def dim_xi(self) -> float:
        return (self.d + self.sigma) / 2.0

    @property
    def boundary_case(self) -> bool:
        return self.dim_phi == 0.0

    def rho(self, i: int, m: int, a=0) -> float:
        """Scaling exponent rho(i, m, a); a may be a total spatial degree or
        a tuple of multi-indices."""
        if isinstance(a, (int, float)):
            deg = float(a)
        else:
            deg = float(sum(sum(aq) for aq in a))
        return -self.dim_xi + i * self.dim_lambda + m * self.dim_phi + deg

    # -- derived integers -------------------------------------------------

    @property
    def i_diamond(self) -> int:
        """Largest i with rho(i, 0, 0) <= 0."""
        i = 0
        while self.rho(i + 1, 0) <= 0:
            i += 1
        return i

    @property
    def i_rhd(self) -> int:
        """Largest i with rho(i, 0, 0) + sigma <= 0 (order of the stationary
        truncation used by the Da Prato-Debussche shift)."""
        i = -1
        while self.rho(i + 1, 0) + self.sigma <= 0:
            i += 1
        return max(i, 0)

    @property
    def i_flat(self) -> int:
        return max((mo.i for mo in self.monomials), default=1)

    @property
    def m_flat(self) -> int:
        return max((mo.m for mo in self.monomials), default=1)

    @property
    def m_diamond(self) -> int:
        rel = self.relevant_indices()
        return max((m for (_, m, _) in rel), default=0)

    # -- classification ---------------------------------------------------

    def _spatial_indices_of_degree(self, deg: int):
        """All multi-indices on d axes with total degree deg."""
        if deg == 0:
            yield (0,) * self.d
            return
        for combo in itertools.combinations_with_replacement(range(self.d), deg):
            idx = [0] * self.d
            for c in combo:
                idx[c] += 1
            yield tuple(idx)

    def _index_lists(self, m: int, total_deg: int):
        """Sorted lists of m spatial multi-indices, each of degree < sigma,
        with total degree total_deg (up to slot permutation)."""
        per_slot = []
        max_deg = int(np.ceil(self.sigma)) - 1
        for degs in itertools.product(range(max_deg + 1), repeat=m):
            if sum(degs) != total_deg:
                continue
            slots = [list(self._spatial_indices_of_degree(dg)) for dg in degs]
            for combo in itertools.product(*slots):
                yield tuple(sorted(combo))

    def enumerate_indices(self):
        """All (i, m, a) with i <= i_flat + i_diamond, m <= m_flat * i, plus
        every derivative pattern with rho <= 0 and those carried by the
        declared monomials."""
        seen = set()
        out = []
        i_max = self.i_flat + self.i_diamond
        for i in range(0, i_max + 1):
            m_max = self.m_flat * i if i > 0 else 0
            for m in range(0, m_max + 1):
                deg = 0
                while True:
                    r = self.rho(i, m, deg)
                    if deg > 0 and r > 0:
                        break
                    if deg >= self.sigma * m + 1 and m > 0:
                        break
                    if m == 0 and deg > 0:
                        break
                    for a in self._index_lists(m, deg) if m > 0 else [()]:
                        key = (i, m, a)
                        if key not in seen:
                            seen.add(key)
                            out.append(key)
                    deg += 1
                    if m == 0:
                        break
        for mo in self.monomials:
            key = (mo.i, mo.m, tuple(sorted(mo.a)))
            if key not in seen:
                seen.add(key)
                out.append(key)
        return out

    def relevant_indices(self):
        idx = [k for k in self.enumerate_indices() if self.rho(k[0], k[1], k[2]) <= 0]
        return [k for k in idx if not (k[0] == 0 and k[1] == 0)]

    def irrelevant_indices(self):
        return [k for k in self.enumerate_indices() if self.rho(k[0], k[1], k[2]) > 0]


def classify(spec: ModelSpec) -> dict:
    """Partition the index set and report the derived integers."""
    rel = spec.relevant_indices()
    irr = spec.irrelevant_indices()
    table = {k: spec.rho(k[0], k[1], k[2]) for k in spec.enumerate_indices()}
    return {
        "relevant": rel,
        "relevant_filtered": relevant_filtered(spec),
        "irrelevant": irr,
        "rho": table,
        "i_diamond": spec.i_diamond,
        "m_diamond": spec.m_diamond,
        "i_rhd": spec.i_rhd,
        "i_flat": spec.i_flat,
        "m_flat": spec.m_flat,
        "dim_phi": spec.dim_phi,
        "dim_xi": spec.dim_xi,
    }


def symmetry_filter(spec: ModelSpec) -> ModelSpec:
    """Drop monomials violating the declared symmetry (idempotent).

    parity_z2: an odd system's force must be odd, so even-arity monomials go.
    shift_r: the force may depend on phi only through spatial derivatives, so
    monomials with an underived slot go.
    """
    if spec.symmetry == "none":
        return spec
    keep = []
    for mo in spec.monomials:
        if spec.symmetry == "parity_z2" and mo.m % 2 == 0:
            continue
        if spec.symmetry == "shift_r" and any(sum(aq) == 0 for aq in mo.a):
            continue
        keep.append(mo)
    return replace(spec, monomials=tuple(keep))


def allowed_by_symmetry(spec: ModelSpec, i: int, m: int, a) -> bool:
    """Both symmetry groups sit on top of the spatial isometries of the
    torus, under which a coefficient with odd total derivative degree must
    vanish."""
    if sum(sum(aq) for aq in a) % 2 == 1:
        return False
    if spec.symmetry == "parity_z2" and m % 2 == 0:
        return False
    if spec.symmetry == "shift_r" and (m == 0 or any(sum(aq) == 0 for aq in a)):
        return False
    return True


def relevant_filtered(spec: ModelSpec):
    """Relevant indices surviving the declared symmetry: the keys a
    renormalization scheme must supply."""
    return [k for k in spec.relevant_indices() if allowed_by_symmetry(spec, *k)]


@dataclass(frozen=True)
class RenormScheme:
    """Renormalization parameters: anchor values of the expected effective
    coefficients at scale mu = 1 for the relevant indices surviving the
    symmetry filter; all others are forced to zero."""

    values: tuple  # tuple of ((i, m, a), value)

    @staticmethod
    def for_model(spec: ModelSpec, user_values: dict | None = None) -> "RenormScheme":
        user_values = dict(user_values or {})
        entries = []
        for key in relevant_filtered(spec):
            entries.append((key, float(user_values.pop(key, 0.0))))
        if user_values:
            raise ValidationFault(
                f"renormalization values for non-relevant or filtered indices: "
                f"{sorted(user_values)}"
            )
        return RenormScheme(values=tuple(entries))

    def as_dict(self) -> dict:
        return dict(self.values)


def coefficient_value(spec: ModelSpec, mo: Monomial, nu: float) -> float:
    """Boundary value of a prescribed (irrelevant or bare) coefficient:
    base * [nu]^(max(rho,0) + extra)."""
    r = spec.rho(mo.i, mo.m, mo.a)
    lam_nu = float(nu) ** (1.0 / spec.sigma)
    return mo.base * lam_nu ** (max(r, 0.0) + mo.extra_exponent)


def spatial_derivative(f: Field, aq: tuple) -> Field:
    if all(x == 0 for x in aq):
        return f
    fhat = forward_transform(f)
    grids = f.spec.freq_grids()
    mult = np.ones(f.spec.space_shape(), dtype=complex)
    for axis, deg in enumerate(aq):
        if deg:
            mult = mult * (1j * grids[axis]) ** deg
    if f.domain == SPACE_TIME:
        mult = mult[None]
    return inverse_transform(f.spec, mult * fhat, f.domain)


def evaluate_force(
    spec: ModelSpec,
    counterterms,
    phi: Field,
    noise: Field | None,
    nu: float,
) -> Field:
    """Pointwise evaluation of F_nu[phi] on the lattice.

    Relevant coefficients come from `counterterms` (a CounterTermResult or a
    plain dict keyed by (i, m, a)); prescribed coefficients from the monomial
    list.  Missing relevant coefficients fault with the index.
    """
    ct = _ct_dict(counterterms)
    out = np.array(noise.data, dtype=float, copy=True) if noise is not None else np.zeros_like(phi.data)
    terms = {}
    for mo in spec.monomials:
        key = (mo.i, mo.m, tuple(sorted(mo.a)))
        terms[key] = coefficient_value(spec, mo, nu)
    for key in relevant_filtered(spec):
        if key in ct:
            terms[key] = ct[key]
        elif key not in terms:
            raise ValidationFault(f"missing relevant coefficient for index {key}")
    for (i, m, a), coeff in terms.items():
        if coeff == 0.0:
            continue
        prod = np.ones_like(phi.data)
        for aq in a:
            prod = prod * spatial_derivative(phi, aq).data
        sign = (-1.0) ** sum(sum(aq) for aq in a)
        out += sign * spec.lam**i * coeff * prod
    return Field(phi.spec, out, phi.domain)


def _ct_dict(counterterms) -> dict:
    if counterterms is None:
        return {}
    if isinstance(counterterms, dict):
        return counterterms
    return counterterms.as_dict()


# -- preset model library --------------------------------------------------


def preset(name: str, lam: float = 1.0, base: float = -1.0, noise=None) -> ModelSpec:
    """Model configurations used as regression fixtures.

    phi4_3d: d=3, sigma=2, dim(lambda)=1 (the dynamic phi^4_3 equation);
    frac_phi4_4d: d=4 is out of lattice range, kept for classification only;
    phi4_desk: d=1, sigma=1/2 cubic -- the desk-scale workhorse.
    """
    if name == "phi4_3d":
        return ModelSpec(
            d=3,
            sigma=2.0,
            dim_lambda=1.0,
            lam=lam,
            monomials=(Monomial(i=1, m=3, a=0, base=base),),
            symmetry="parity_z2",
            noise=noise,
        )
    if name == "phi4_desk":
        return ModelSpec(
            d=1,
            sigma=0.5,
            dim_lambda=0.3,
            lam=lam,
            monomials=(Monomial(i=1, m=3, a=0, base=base),),
            symmetry="parity_z2",
            noise=noise,
        )
    if name == "linear_desk":
        return ModelSpec(
            d=1,
            sigma=0.5,
            dim_lambda=0.3,
            lam=lam,
            monomials=(),
            symmetry="none",
            noise=noise,
        )
    raise ValidationFault(f"unknown preset {name!r}")
