"""Kernel families, their generators, and the structural identity checks.

Sequences are stored 0-based; a Window(l, n) covers positions l+1 ... l+n in
the 1-based labelling used throughout the docstrings, so entry (j, k) of a
window sits at [j-l-1, k-l-1] of the dense array.
"""

from dataclasses import dataclass, field

import numpy as np

from .identities import IdentityError

# s values beyond this would silently lose the increments that the closed
# inverses divide by, so builders refuse rather than degrade.
OVERFLOW_LIMIT = 1e300

CLOSED_FORM_TOL = 1e-12
DENSE_CHECK_TOL = 1e-10
CONDITION_LIMIT = 1e12


def _as_float_array(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Window:
    """Index window covering positions l+1 ... l+n."""

    l: int
    n: int

    def __post_init__(self):
        if self.l < 0 or self.n < 1:
            raise ValueError("window requires l >= 0 and n >= 1")

    @property
    def labels(self):
        return np.arange(self.l + 1, self.l + self.n + 1)


@dataclass(frozen=True)
class DenseKernelWindow:
    """Dense kernel values on a window, tagged with their source spec."""

    window: Window
    entries: np.ndarray
    spec: "KernelSpec"
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.labels is None:
            object.__setattr__(self, "labels", self.window.labels)

    @property
    def n(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Truncation of a banded generator Q with row diagnostics.

    ``entries`` holds the infinite matrix restricted to the leading block, so
    every stored entry is exact; rows whose band sticks out of the truncation
    are boundary rows and excluded from ``interior_rows``.
    """

    entries: np.ndarray
    band: int
    spec: "KernelSpec"

    @property
    def size(self):
        return self.entries.shape[0]

    @property
    def interior_rows(self):
        # row j (0-based) is complete iff j + band < size
        return np.arange(0, max(0, self.size - self.band))

    @property
    def row_sums(self):
        return self.entries.sum(axis=1)

    def offdiag_sign_summary(self):
        off = self.entries.copy()
        np.fill_diagonal(off, 0.0)
        return {
            "negative": int((off < 0).sum()),
            "zero": int((off == 0).sum()),
            "positive": int((off > 0).sum()),
        }


# ---------------------------------------------------------------------------
# kernel family specs
# ---------------------------------------------------------------------------

_FAMILIES = {}


def _register(cls):
    _FAMILIES[cls.family] = cls
    return cls


@dataclass(frozen=True)
class KernelSpec:
    """Base for the tagged kernel families."""

    family = None

    def __eq__(self, other):
        if not isinstance(other, KernelSpec):
            return NotImplemented
        return self.to_config() == other.to_config()

    def __hash__(self):
        return hash(repr(self.to_config()))

    def to_config(self):
        raise NotImplementedError

    @staticmethod
    def from_config(doc):
        try:
            fam = doc["family"]
        except (TypeError, KeyError):
            raise ValueError("kernel config requires a 'family' tag") from None
        try:
            cls = _FAMILIES[fam]
        except KeyError:
            raise ValueError(f"unknown kernel family: {fam!r}") from None
        return cls._from_config(doc)


def _require_increasing_positive(s, name="s"):
    if s[0] <= 0:
        raise ValueError(f"{name} must start positive")
    if np.any(np.diff(s) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if s[-1] > OVERFLOW_LIMIT:
        raise ValueError(f"{name} exceeds {OVERFLOW_LIMIT:g}; rebuild in log space")


@_register
@dataclass(frozen=True, eq=False)
class MinKernel(KernelSpec):
    """V[j,k] = s[min(j,k)] for strictly increasing positive s."""

    s: np.ndarray
    family = "min"

    def __post_init__(self):
        object.__setattr__(self, "s", _as_float_array(self.s, "s"))
        _require_increasing_positive(self.s)

    def to_config(self):
        return {"family": self.family, "s": self.s.tolist()}

    @classmethod
    def _from_config(cls, doc):
        return cls(s=doc["s"])


@_register
@dataclass(frozen=True, eq=False)
class ScaledMinKernel(KernelSpec):
    """W[j,k] = s[min(j,k)] / (b[j] b[k])."""

    s: np.ndarray
    b: np.ndarray
    family = "scaled_min"

    def __post_init__(self):
        object.__setattr__(self, "s", _as_float_array(self.s, "s"))
        object.__setattr__(self, "b", _as_float_array(self.b, "b"))
        _require_increasing_positive(self.s)
        if self.b.size != self.s.size:
            raise ValueError("s and b must have equal length")
        if np.any(self.b <= 0):
            raise ValueError("b must be positive")

    def to_config(self):
        return {"family": self.family, "s": self.s.tolist(), "b": self.b.tolist()}

    @classmethod
    def _from_config(cls, doc):
        return cls(s=doc["s"], b=doc["b"])


@_register
@dataclass(frozen=True, eq=False)
class ExpKernel(KernelSpec):
    """W[j,k] = exp(-|v[j] - v[k]|) for strictly increasing v."""

    v: np.ndarray
    family = "exp"

    def __post_init__(self):
        object.__setattr__(self, "v", _as_float_array(self.v, "v"))
        if np.any(np.diff(self.v) <= 0):
            raise ValueError("v must be strictly increasing")

    def to_config(self):
        return {"family": self.family, "v": self.v.tolist()}

    @classmethod
    def _from_config(cls, doc):
        return cls(v=doc["v"])

    def as_scaled_min(self):
        """Equivalent ScaledMinKernel with b = e^v, s = e^{2v}.

        Only valid while e^{2v} stays in range; the direct exp form never
        overflows and is preferred for computation.
        """
        if 2.0 * self.v[-1] > np.log(OVERFLOW_LIMIT):
            raise ValueError("e^{2v} overflows; use the exp form directly")
        return ScaledMinKernel(s=np.exp(2.0 * self.v), b=np.exp(self.v))


@_register
@dataclass(frozen=True, eq=False)
class AR1(KernelSpec):
    """Covariance of xi[n] = x[n-1] xi[n-1] + g[n] with iid standard g.

    x in (0, 1], non-decreasing. Entries carry the product form
    U[j,k] = U[j,j] prod(x[j..k-1]) for j <= k, which never overflows.
    """

    x: np.ndarray
    family = "ar1"

    def __post_init__(self):
        object.__setattr__(self, "x", _as_float_array(self.x, "x"))
        if np.any(self.x <= 0) or np.any(self.x > 1):
            raise ValueError("x must lie in (0, 1]")
        if np.any(np.diff(self.x) < 0):
            raise ValueError("x must be non-decreasing")

    def to_config(self):
        return {"family": self.family, "x": self.x.tolist()}

    @classmethod
    def _from_config(cls, doc):
        return cls(x=doc["x"])

    def diagonal(self, n):
        """U[j,j] for j = 1..n via U[j+1,j+1] = x[j]^2 U[j,j] + 1."""
        if n > self.x.size + 1:
            raise ValueError("x too short for requested diagonal")
        d = np.empty(n)
        d[0] = 1.0
        for j in range(1, n):
            d[j] = self.x[j - 1] ** 2 * d[j - 1] + 1.0
        return d


@_register
@dataclass(frozen=True, eq=False)
class AR1Shifted(KernelSpec):
    """AR1 with the first innovation scaled by delta_tilde."""

    x: np.ndarray
    delta_tilde: float
    family = "ar1_shifted"

    def __post_init__(self):
        object.__setattr__(self, "x", AR1(self.x).x)
        object.__setattr__(self, "delta_tilde", float(self.delta_tilde))
        if self.delta_tilde == 0.0:
            raise ValueError("delta_tilde must be nonzero")

    def to_config(self):
        return {
            "family": self.family,
            "x": self.x.tolist(),
            "delta_tilde": self.delta_tilde,
        }

    @classmethod
    def _from_config(cls, doc):
        return cls(x=doc["x"], delta_tilde=doc["delta_tilde"])

    @property
    def base(self):
        return AR1(self.x)


@_register
@dataclass(frozen=True, eq=False)
class ARk(KernelSpec):
    """Covariance of xi[n] = sum(p[l] xi[n-l]) + g[n], sum(p) <= 1.

    ``p_non_increasing`` records whether the generator construction is
    available; the covariance analytics do not need it.
    """

    p: np.ndarray
    family = "ark"

    def __post_init__(self):
        object.__setattr__(self, "p", _as_float_array(self.p, "p"))
        if np.any(self.p <= 0):
            raise ValueError("p must be positive")
        if self.p.sum() > 1.0 + 1e-12:
            raise ValueError("sum(p) must be <= 1")

    @property
    def k(self):
        return self.p.size

    @property
    def p_non_increasing(self):
        return bool(np.all(np.diff(self.p) <= 0))

    def to_config(self):
        return {"family": self.family, "p": self.p.tolist()}

    @classmethod
    def _from_config(cls, doc):
        return cls(p=doc["p"])

    def phi(self, n):
        """Impulse-response coefficients phi[1..n] (returned 0-based)."""
        ph = np.zeros(n)
        ph[0] = 1.0
        for m in range(1, n):
            lo = max(0, m - self.k)
            ph[m] = np.dot(self.p[: m - lo], ph[m - 1 : lo - 1 if lo > 0 else None : -1])
        return ph


@_register
@dataclass(frozen=True, eq=False)
class ARkGen(KernelSpec):
    """ARk with first innovation g[1]/a; kernel gains ((1-a^2)/a^2) phi phi^T."""

    p: np.ndarray
    a_sq: float
    family = "ark_gen"

    def __post_init__(self):
        object.__setattr__(self, "p", ARk(self.p).p)
        object.__setattr__(self, "a_sq", float(self.a_sq))
        if self.a_sq <= 0:
            raise ValueError("a_sq must be positive")

    def to_config(self):
        return {"family": self.family, "p": self.p.tolist(), "a_sq": self.a_sq}

    @classmethod
    def _from_config(cls, doc):
        return cls(p=doc["p"], a_sq=doc["a_sq"])

    @property
    def base(self):
        return ARk(self.p)


@_register
@dataclass(frozen=True, eq=False)
class ShiftedScaled(KernelSpec):
    """ScaledMinKernel on the shifted sequence s + Delta."""

    s: np.ndarray
    b: np.ndarray
    Delta: float
    family = "shifted_scaled"

    def __post_init__(self):
        base = ScaledMinKernel(self.s, self.b)
        object.__setattr__(self, "s", base.s)
        object.__setattr__(self, "b", base.b)
        object.__setattr__(self, "Delta", float(self.Delta))
        if self.Delta <= -self.s[0]:
            raise IdentityError(
                "shift-admissible-scaled",
                f"Delta = {self.Delta} must exceed -s1 = {-self.s[0]}",
            )

    def to_config(self):
        return {
            "family": self.family,
            "s": self.s.tolist(),
            "b": self.b.tolist(),
            "Delta": self.Delta,
        }

    @classmethod
    def _from_config(cls, doc):
        return cls(s=doc["s"], b=doc["b"], Delta=doc["Delta"])

    @property
    def base(self):
        return ScaledMinKernel(self.s, self.b)


@_register
@dataclass(frozen=True, eq=False)
class RankOneUpdate(KernelSpec):
    """Kernel of the generator Q + b E(k, l); indices are 1-based."""

    base: KernelSpec
    k: int
    l: int
    b: float
    family = "rank_one_update"

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "b", float(self.b))
        if self.k < 1 or self.l < 1 or self.k == self.l:
            raise ValueError("k, l must be distinct 1-based indices")

    def to_config(self):
        return {
            "family": self.family,
            "base": self.base.to_config(),
            "k": self.k,
            "l": self.l,
            "b": self.b,
        }

    @classmethod
    def _from_config(cls, doc):
        return cls(
            base=KernelSpec.from_config(doc["base"]),
            k=doc["k"],
            l=doc["l"],
            b=doc["b"],
        )


@_register
@dataclass(frozen=True, eq=False)
class KilledWalk(KernelSpec):
    """Lattice walk on Z with jump rates by signed offset, killed at rate beta."""

    step_rates: dict
    beta: float
    radius: int
    family = "killed_walk"

    def __post_init__(self):
        rates = {int(d): float(r) for d, r in dict(self.step_rates).items()}
        if any(d == 0 for d in rates):
            raise ValueError("offsets must be nonzero")
        if any(r < 0 for r in rates.values()):
            raise ValueError("rates must be nonnegative")
        if sum(rates.values()) <= 0:
            raise ValueError("at least one positive rate required")
        object.__setattr__(self, "step_rates", rates)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "radius", int(self.radius))
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")

    def to_config(self):
        return {
            "family": self.family,
            "step_rates": {str(d): r for d, r in sorted(self.step_rates.items())},
            "beta": self.beta,
            "radius": self.radius,
        }

    @classmethod
    def _from_config(cls, doc):
        rates = {int(d): r for d, r in doc["step_rates"].items()}
        return cls(step_rates=rates, beta=doc["beta"], radius=doc["radius"])


# ---------------------------------------------------------------------------
# kernel construction
# ---------------------------------------------------------------------------

def _min_entries(s, window):
    idx = np.arange(window.l, window.l + window.n)
    if idx[-1] >= s.size:
        raise ValueError("window extends past supplied s")
    return s[np.minimum.outer(idx, idx)]


def _ar1_diag_products(x, hi):
    # diagonal U[j,j] for j=1..hi and running products t[j] = prod(x[:j-1])
    d = np.empty(hi)
    d[0] = 1.0
    for j in range(1, hi):
        d[j] = x[j - 1] ** 2 * d[j - 1] + 1.0
    t = np.empty(hi)
    t[0] = 1.0
    t[1:] = np.cumprod(x[: hi - 1])
    return d, t


def _ar1_entries(x, window):
    hi = window.l + window.n
    if hi > x.size + 1:
        raise ValueError("window extends past supplied x")
    d, _ = _ar1_diag_products(x, hi)
    # U[j,k] = U[j,j] prod(x[j..k-1]) for j <= k; the product is built from
    # log sums so long windows underflow to 0 instead of degrading to NaN
    lo = window.l
    dj = d[lo:hi]
    logt = np.zeros(hi)
    logt[1:] = np.cumsum(np.log(x[: hi - 1]))
    lt = logt[lo:hi]
    decay = np.exp(-np.abs(np.subtract.outer(lt, lt)))
    dmin = np.minimum.outer(dj, dj)
    # the diagonal factor belongs to the smaller index of the pair
    return dmin * decay


def _ark_entries(p, window):
    spec = ARk(p)
    hi = window.l + window.n
    ph = spec.phi(hi)
    # V[m,n] = sum_{t=1..min(m,n)} phi[t] phi[t+|m-n|]; one cumulative sum per lag
    out = np.empty((window.n, window.n))
    for dlag in range(window.n):
        csum = np.cumsum(ph[: hi - dlag] * ph[dlag:hi])
        idx = np.arange(window.n - dlag)
        out[idx, idx + dlag] = csum[window.l + idx]
        out[idx + dlag, idx] = csum[window.l + idx]
    return out


def build_kernel(spec, window):
    """Dense kernel values of the family on the window."""
    if isinstance(spec, MinKernel):
        entries = _min_entries(spec.s, window)
    elif isinstance(spec, ScaledMinKernel):
        idx = np.arange(window.l, window.l + window.n)
        if idx[-1] >= spec.b.size:
            raise ValueError("window extends past supplied b")
        b = spec.b[idx]
        entries = _min_entries(spec.s, window) / np.outer(b, b)
    elif isinstance(spec, ShiftedScaled):
        idx = np.arange(window.l, window.l + window.n)
        b = spec.b[idx]
        entries = (_min_entries(spec.s, window) + spec.Delta) / np.outer(b, b)
    elif isinstance(spec, ExpKernel):
        idx = np.arange(window.l, window.l + window.n)
        if idx[-1] >= spec.v.size:
            raise ValueError("window extends past supplied v")
        v = spec.v[idx]
        entries = np.exp(-np.abs(np.subtract.outer(v, v)))
    elif isinstance(spec, AR1):
        entries = _ar1_entries(spec.x, window)
    elif isinstance(spec, AR1Shifted):
        decide_shift_admissible(spec, raise_on_fail=True)
        entries = _ar1_entries(spec.x, window)
        hi = window.l + window.n
        _, t = _ar1_diag_products(spec.x, hi)
        tw = t[window.l : hi]
        entries = entries + (spec.delta_tilde**2 - 1.0) * np.outer(tw, tw)
    elif isinstance(spec, ARk):
        entries = _ark_entries(spec.p, window)
    elif isinstance(spec, ARkGen):
        decide_shift_admissible(spec, raise_on_fail=True)
        entries = _ark_entries(spec.p, window)
        hi = window.l + window.n
        ph = spec.base.phi(hi)[window.l : hi]
        entries = entries + ((1.0 - spec.a_sq) / spec.a_sq) * np.outer(ph, ph)
    elif isinstance(spec, RankOneUpdate):
        entries = _rank_one_entries(spec, window)
    elif isinstance(spec, KilledWalk):
        raise TypeError("KilledWalk lives on Z; use killed_walk_potential")
    else:
        raise TypeError(f"unsupported spec type: {type(spec).__name__}")
    return DenseKernelWindow(window=window, entries=entries, spec=spec)


def _rank_one_entries(spec, window):
    # the update references absolute indices k, l; build the base on a window
    # reaching all of them, apply the closed form, then slice
    hi = max(window.l + window.n, spec.k, spec.l)
    U = build_kernel(spec.base, Window(0, hi)).entries
    ki, li = spec.k - 1, spec.l - 1
    if spec.b >= 1.0 / U[li, ki]:
        raise IdentityError(
            "rank-one-admissible",
            f"b = {spec.b} must be < 1/U[l,k] = {1.0 / U[li, ki]}",
        )
    W = U + spec.b * np.outer(U[:, ki], U[li, :]) / (1.0 - spec.b * U[ki, li])
    lo = window.l
    return W[lo : lo + window.n, lo : lo + window.n]


def rank_one_update(kernel, k, l, b):
    """Sherman-Morrison update of a dense kernel window for Q + b E(k, l).

    k, l are 1-based labels that must lie inside the window.
    """
    labels = kernel.labels
    if k not in labels or l not in labels:
        raise ValueError("k and l must lie inside the kernel window")
    ki = int(np.searchsorted(labels, k))
    li = int(np.searchsorted(labels, l))
    U = kernel.entries
    if b >= 1.0 / U[li, ki]:
        raise IdentityError(
            "rank-one-admissible",
            f"b = {b} must be < 1/U[l,k] = {1.0 / U[li, ki]}",
        )
    W = U + b * np.outer(U[:, ki], U[li, :]) / (1.0 - b * U[ki, li])
    spec = RankOneUpdate(base=kernel.spec, k=int(k), l=int(l), b=float(b))
    return DenseKernelWindow(window=kernel.window, entries=W, spec=spec)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _min_increments(s, size):
    # a[m] = 1/(s[m] - s[m-1]) with s[0] = 0, for m = 1..size+1 (1-based)
    if s.size < size + 1:
        raise ValueError("generator truncation needs len(s) >= size + 1")
    gaps = np.empty(size + 1)
    gaps[0] = s[0]
    gaps[1:] = np.diff(s[: size + 1])
    return 1.0 / gaps


def _tridiag(diag, off):
    n = diag.size
    M = np.zeros((n, n))
    M[np.arange(n), np.arange(n)] = diag
    M[np.arange(n - 1), np.arange(1, n)] = off
    M[np.arange(1, n), np.arange(n - 1)] = off
    return M


def _min_generator(s, size):
    a = _min_increments(s, size)  # a[0] = 1/s1, a[m] = 1/(s_{m+1}-s_m)
    diag = a[:size] + a[1 : size + 1]
    off = -a[1:size]
    return _tridiag(diag, off)


def build_generator(spec, size):
    """Leading size x size block of the family's generator Q.

    Entries are those of the infinite matrix, so the last ``band`` rows are
    boundary rows whose off-block entries are cut.
    """
    if isinstance(spec, MinKernel):
        return GeneratorMatrix(entries=-_min_generator(spec.s, size), band=1, spec=spec)
    if isinstance(spec, (ScaledMinKernel, ShiftedScaled)):
        s = spec.s if isinstance(spec, ScaledMinKernel) else spec.s + spec.Delta
        if isinstance(spec, ShiftedScaled):
            decide_shift_admissible(spec, raise_on_fail=True)
        if spec.b.size < size:
            raise ValueError("generator truncation needs len(b) >= size")
        negQ = _min_generator(s, size)
        b = spec.b[:size]
        return GeneratorMatrix(entries=-(negQ * np.outer(b, b)), band=1, spec=spec)
    if isinstance(spec, ExpKernel):
        return GeneratorMatrix(entries=-_exp_generator(spec.v, size), band=1, spec=spec)
    if isinstance(spec, AR1):
        return GeneratorMatrix(entries=-_ar1_generator(spec.x, size), band=1, spec=spec)
    if isinstance(spec, AR1Shifted):
        decide_shift_admissible(spec, raise_on_fail=True)
        negQ = _ar1_generator(spec.x, size)
        negQ[0, 0] = 1.0 / spec.delta_tilde**2 + spec.x[0] ** 2
        return GeneratorMatrix(entries=-negQ, band=1, spec=spec)
    if isinstance(spec, ARk):
        return GeneratorMatrix(entries=-_ark_generator(spec, size), band=spec.k, spec=spec)
    if isinstance(spec, ARkGen):
        decide_shift_admissible(spec, raise_on_fail=True)
        A = _ark_generator(spec.base, size)
        A[0, 0] = spec.a_sq + np.sum(spec.p**2)
        return GeneratorMatrix(entries=-A, band=spec.base.k, spec=spec)
    if isinstance(spec, RankOneUpdate):
        base = build_generator(spec.base, size)
        Q = base.entries.copy()
        if spec.k > size or spec.l > size:
            raise ValueError("bump indices outside generator truncation")
        Q[spec.k - 1, spec.l - 1] += spec.b
        return GeneratorMatrix(entries=Q, band=max(base.band, abs(spec.k - spec.l)), spec=spec)
    if isinstance(spec, KilledWalk):
        G = _walk_generator(spec)
        return GeneratorMatrix(
            entries=G - spec.beta * np.eye(G.shape[0]),
            band=max(abs(d) for d in spec.step_rates),
            spec=spec,
        )
    raise TypeError(f"no generator for spec type: {type(spec).__name__}")


def _exp_generator(v, size):
    # gap form of D_b Q(s) D_b with b = e^v, s = e^{2v}; stays finite for any v
    if v.size < size + 1:
        raise ValueError("generator truncation needs len(v) >= size + 1")
    g = np.diff(v[: size + 1])
    diag = np.empty(size)
    diag[0] = 1.0 + 1.0 / np.expm1(2.0 * g[0])
    if size > 1:
        diag[1:] = 1.0 / -np.expm1(-2.0 * g[:-1]) + 1.0 / np.expm1(2.0 * g[1:])
    off = -0.5 / np.sinh(g[:-1])
    return _tridiag(diag, off)


def _ar1_generator(x, size):
    if x.size < size:
        raise ValueError("generator truncation needs len(x) >= size")
    diag = 1.0 + x[:size] ** 2
    off = -x[: size - 1]
    return _tridiag(diag, off)


def _ark_generator(spec, size):
    if not spec.p_non_increasing:
        raise IdentityError(
            "q-matrix-signs",
            "ARk generator requires non-increasing p; increasing weights can "
            "flip off-diagonal signs",
        )
    p = spec.p
    k = spec.k
    A = np.zeros((size, size))
    np.fill_diagonal(A, 1.0 + np.sum(p**2))
    for d in range(1, min(k, size - 1) + 1):
        val = -p[d - 1] + np.dot(p[: k - d], p[d:k])
        idx = np.arange(size - d)
        A[idx, idx + d] = val
        A[idx + d, idx] = val
    return A


def ark_band_factor(spec, size):
    """Unit lower band factor L with A = L^T L (rows beyond k are shifts)."""
    p = spec.p
    L = np.eye(size)
    for d in range(1, min(spec.k, size - 1) + 1):
        idx = np.arange(size - d)
        L[idx + d, idx] = -p[d - 1]
    return L


def _walk_generator(spec):
    R = spec.radius
    size = 2 * R + 1
    G = np.zeros((size, size))
    total = sum(spec.step_rates.values())
    np.fill_diagonal(G, -total)
    for d, r in spec.step_rates.items():
        if r == 0.0:
            continue
        if abs(d) < size:
            idx = np.arange(size - abs(d))
            if d > 0:
                G[idx, idx + d] = r
            else:
                G[idx + abs(d), idx] = r
    return G


# ---------------------------------------------------------------------------
# window inverses
# ---------------------------------------------------------------------------

def min_window_inverse(s, window):
    """Closed tridiagonal inverse of a min-kernel window.

    With a[m] = 1/(s[m] - s[m-1]) (s[0] = 0):
      (1) first diagonal entry 1/s[l+1] + a[l+2]
      (2) interior diagonal a[l+j] + a[l+j+1]
      (3) last diagonal a[l+n]
      (4) off-diagonal entries -a[l+j+1]
    A 1x1 window degenerates to [1/s[l+1]].
    """
    l, n = window.l, window.n
    if l + n > s.size:
        raise ValueError("window extends past supplied s")
    svals = s[l : l + n]
    prev = s[l - 1] if l > 0 else 0.0
    gaps = np.empty(n)
    gaps[0] = svals[0] - prev
    gaps[1:] = np.diff(svals)
    a = 1.0 / gaps  # a[j] = a_{l+j+1} in 1-based labels
    if n == 1:
        return np.array([[1.0 / svals[0]]])
    diag = np.empty(n)
    diag[0] = 1.0 / svals[0] + a[1]
    diag[1:-1] = a[1:-1] + a[2:]
    diag[-1] = a[-1]
    return _tridiag(diag, -a[1:])


def window_inverse(spec, window, check=True):
    """Inverse of the kernel window; closed form for min kernels.

    The closed form is cross-checked against a dense solve; the dense path
    refuses windows whose condition estimate exceeds CONDITION_LIMIT.
    """
    kernel = build_kernel(spec, window)
    if isinstance(spec, MinKernel):
        inv = min_window_inverse(spec.s, window)
        if check:
            dense = np.linalg.solve(kernel.entries, np.eye(window.n))
            gap = np.abs(inv - dense).max()
            if gap > DENSE_CHECK_TOL:
                raise IdentityError(
                    "min-window-inverse",
                    f"closed form differs from dense solve by {gap:.3e}",
                )
        return inv
    K = kernel.entries
    try:
        inv = np.linalg.solve(K, np.eye(K.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise IdentityError("window-inverse-identity", f"singular window: {exc}")
    cond = np.linalg.norm(K, 1) * np.linalg.norm(inv, 1)
    if cond > CONDITION_LIMIT:
        raise IdentityError(
            "window-inverse-identity",
            f"condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:g}",
        )
    if check:
        gap = np.abs(inv @ K - np.eye(K.shape[0])).max()
        if gap > DENSE_CHECK_TOL * max(1.0, cond / 1e2):
            raise IdentityError(
                "window-inverse-identity",
                f"inverse residual {gap:.3e} with condition {cond:.3e}",
            )
    return inv


# ---------------------------------------------------------------------------
# duality and sign-structure reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualityReport:
    checks: dict            # name -> max interior residual
    excluded_rows: int
    worst: tuple            # (check name, row label, residual)
    tol: float

    @property
    def ok(self):
        return all(v <= self.tol for v in self.checks.values())


def verify_duality(spec, window, tol=1e-8):
    """Residuals of the kernel/generator dualities on a truncation.

    Runs Q U + I on rows whose band lies inside the truncation, the band
    factorization check for ARk, and the kernel-times-generator identity on
    the columns it is exact for. Boundary rows/columns are counted, not
    asserted.
    """
    size = window.l + window.n
    G = build_generator(spec, size)
    U = build_kernel(spec, Window(0, size)).entries
    interior = G.interior_rows
    excluded = size - interior.size
    checks = {}
    worst = ("", -1, 0.0)

    resid = G.entries @ U + np.eye(size)
    sub = np.abs(resid[interior, :])
    checks["generator-times-kernel"] = float(sub.max()) if sub.size else 0.0
    if sub.size:
        r = int(np.unravel_index(np.argmax(sub), sub.shape)[0])
        worst = ("generator-times-kernel", int(interior[r]) + 1, checks["generator-times-kernel"])

    # U Q is exact on columns whose band lies inside; for symmetric families
    # it mirrors the row check, for rank-one updates it does not
    residc = U @ G.entries + np.eye(size)
    subc = np.abs(residc[:, interior])
    checks["kernel-times-generator"] = float(subc.max()) if subc.size else 0.0
    if subc.size and checks["kernel-times-generator"] > worst[2]:
        c = int(np.unravel_index(np.argmax(subc), subc.shape)[1])
        worst = ("kernel-times-generator", int(interior[c]) + 1, checks["kernel-times-generator"])

    if isinstance(spec, ARk):
        L = ark_band_factor(spec, size)
        A = -G.entries
        prod = L.T @ L
        k = spec.k
        inner = np.abs(prod - A)[: size - k, : size - k]
        checks["band-factorization"] = float(inner.max()) if inner.size else 0.0
        if inner.size and checks["band-factorization"] > worst[2]:
            r = int(np.unravel_index(np.argmax(inner), inner.shape)[0])
            worst = ("band-factorization", r + 1, checks["band-factorization"])

    return DualityReport(checks=checks, excluded_rows=excluded, worst=worst, tol=tol)


@dataclass(frozen=True)
class QMatrixReport:
    diag_negative: bool
    offdiag_nonnegative: bool
    row_sums_nonpositive: bool
    norm: float
    row_sums_bounded_away: bool
    violations: tuple

    @property
    def ok(self):
        return self.diag_negative and self.offdiag_nonnegative and self.row_sums_nonpositive


def check_q_matrix(G, bounded_threshold=0.0, sign_tol=1e-12):
    """Sign-pattern and row-sum diagnostics for a generator truncation."""
    Q = G.entries
    diag = np.diag(Q)
    off = Q.copy()
    np.fill_diagonal(off, 0.0)
    violations = []
    diag_ok = bool(np.all(diag < 0))
    if not diag_ok:
        violations.append(("diagonal", int(np.argmax(diag >= 0)) + 1))
    off_ok = bool(np.all(off >= -sign_tol))
    if not off_ok:
        i, j = np.unravel_index(np.argmin(off), off.shape)
        violations.append(("off-diagonal", (int(i) + 1, int(j) + 1)))
    rs = G.row_sums
    interior = G.interior_rows
    rows_ok = bool(np.all(rs[interior] <= sign_tol)) if interior.size else True
    if not rows_ok:
        violations.append(("row-sum", int(interior[np.argmax(rs[interior] > sign_tol)]) + 1))
    norm = float(np.abs(Q).sum(axis=1).max())
    bounded = (
        bool(np.all(-rs[interior] >= bounded_threshold)) if interior.size else False
    )
    return QMatrixReport(
        diag_negative=diag_ok,
        offdiag_nonnegative=off_ok,
        row_sums_nonpositive=rows_ok,
        norm=norm,
        row_sums_bounded_away=bounded,
        violations=tuple(violations),
    )


@dataclass(frozen=True)
class InverseMReport:
    diag_nonnegative: bool
    offdiag_nonpositive: bool
    row_sums_nonnegative: bool
    inverse: np.ndarray

    @property
    def ok(self):
        return self.diag_nonnegative and self.offdiag_nonpositive and self.row_sums_nonnegative


def check_inverse_m_matrix(entries, sign_tol=1e-9):
    """Invert a kernel window and test the M-matrix sign pattern."""
    if isinstance(entries, DenseKernelWindow):
        entries = entries.entries
    K = np.asarray(entries, dtype=float)
    try:
        inv = np.linalg.inv(K)
    except np.linalg.LinAlgError as exc:
        raise IdentityError("inverse-m-matrix", f"singular kernel window: {exc}")
    scale = max(1.0, np.abs(inv).max())
    tol = sign_tol * scale
    off = inv.copy()
    np.fill_diagonal(off, 0.0)
    return InverseMReport(
        diag_nonnegative=bool(np.all(np.diag(inv) >= -tol)),
        offdiag_nonpositive=bool(np.all(off <= tol)),
        row_sums_nonnegative=bool(np.all(inv.sum(axis=1) >= -tol)),
        inverse=inv,
    )


# ---------------------------------------------------------------------------
# admissibility of the shifted / generalized families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityDecision:
    admissible: bool
    key: str
    value: float
    bound: tuple      # (lower, upper); None for an unconstrained side
    detail: str


def decide_shift_admissible(spec, raise_on_fail=False):
    """Admissibility decision for shifted and generalized families."""
    if isinstance(spec, ShiftedScaled):
        b, s = spec.b, spec.s
        if b.size >= 2 and not np.isclose(b[1], b[0]):
            upper = (b[0] * s[1] - b[1] * s[0]) / (b[1] - b[0])
        else:
            upper = np.inf
        ok = -s[0] < spec.Delta <= upper
        decision = AdmissibilityDecision(
            admissible=bool(ok),
            key="shift-admissible-scaled",
            value=spec.Delta,
            bound=(-s[0], float(upper)),
            detail=f"-s1 < Delta <= (b1 s2 - b2 s1)/(b2 - b1) = {upper:.6g}",
        )
    elif isinstance(spec, AR1Shifted):
        x1 = spec.x[0]
        upper = np.inf if x1 >= 1.0 else 1.0 / (x1 * (1.0 - x1))
        val = spec.delta_tilde**2
        ok = 0.0 < val <= upper
        decision = AdmissibilityDecision(
            admissible=bool(ok),
            key="shift-admissible-ar1",
            value=val,
            bound=(0.0, float(upper)),
            detail=f"0 < delta_tilde^2 <= 1/(x1 (1 - x1)) = {upper:.6g}",
        )
    elif isinstance(spec, ARkGen):
        ps = spec.p.sum()
        lower = 0.5 * (ps * (2.0 - ps) - np.sum(spec.p**2))
        ok = spec.a_sq >= lower
        decision = AdmissibilityDecision(
            admissible=bool(ok),
            key="shift-admissible-arkgen",
            value=spec.a_sq,
            bound=(float(lower), np.inf),
            detail=f"a^2 >= (sum(p)(2 - sum(p)) - sum(p^2))/2 = {lower:.6g}",
        )
    elif isinstance(spec, RankOneUpdate):
        hi = max(spec.k, spec.l) + 1
        U = build_kernel(spec.base, Window(0, hi)).entries
        upper = 1.0 / U[spec.l - 1, spec.k - 1]
        ok = spec.b < upper
        decision = AdmissibilityDecision(
            admissible=bool(ok),
            key="rank-one-admissible",
            value=spec.b,
            bound=(-np.inf, float(upper)),
            detail=f"b < 1/U[l,k] = {upper:.6g}",
        )
    else:
        decision = AdmissibilityDecision(
            admissible=True,
            key="derived",
            value=0.0,
            bound=(-np.inf, np.inf),
            detail="family carries no shift constraint",
        )
    if raise_on_fail and not decision.admissible:
        raise IdentityError(decision.key, decision.detail + f" (got {decision.value:.6g})")
    return decision


# ---------------------------------------------------------------------------
# killed walk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KilledWalkResult:
    kernel: DenseKernelWindow          # labels are lattice sites -R..R
    row_sums: np.ndarray
    interior: np.ndarray               # boolean mask |site| <= R/2
    max_row_sum_gap: float             # vs 1/beta on the interior
    max_diag_gap: float                # vs U[0,0] on the interior

    @property
    def u00(self):
        R = self.kernel.spec.radius
        return float(self.kernel.entries[R, R])


def killed_walk_potential(spec):
    """Potential of the killed walk on the truncated lattice {-R..R}.

    Solves (beta I - G) U = I with absorbing truncation. Away from the
    boundary the row sums approach 1/beta and the diagonal is flat; both
    gaps shrink as the radius grows.
    """
    G = _walk_generator(spec)
    size = G.shape[0]
    U = np.linalg.solve(spec.beta * np.eye(size) - G, np.eye(size))
    sites = np.arange(-spec.radius, spec.radius + 1)
    interior = np.abs(sites) <= spec.radius // 2
    row_sums = U.sum(axis=1)
    diag = np.diag(U)
    u00 = diag[spec.radius]
    kernel = DenseKernelWindow(
        window=Window(0, size), entries=U, spec=spec, labels=sites
    )
    return KilledWalkResult(
        kernel=kernel,
        row_sums=row_sums,
        interior=interior,
        max_row_sum_gap=float(np.abs(row_sums[interior] - 1.0 / spec.beta).max()),
        max_diag_gap=float(np.abs(diag[interior] - u00).max()),
    )


# ---------------------------------------------------------------------------
# banded-decay envelope
# ---------------------------------------------------------------------------

def decay_envelope(entries):
    """Fit |U[i,k]| <= C exp(-lam |i-k|) through the per-distance maxima.

    Returns (C, lam, ok) where ok means the log-envelope is non-increasing
    in the distance, so a positive decay rate is real and not an artifact
    of one small corner entry.
    """
    U = np.asarray(entries, dtype=float)
    n = U.shape[0]
    dist = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    # drop the largest distances, which only a corner entry attains
    dmax = max(2, (3 * n) // 4)
    envelope = np.array(
        [np.abs(U[dist == d]).max() for d in range(dmax)]
    )
    ok = bool(np.all(np.diff(envelope) <= 1e-12))
    logs = np.log(np.maximum(envelope, 1e-300))
    slope, intercept = np.polyfit(np.arange(dmax), logs, 1)
    return float(np.exp(intercept)), float(-slope), ok
