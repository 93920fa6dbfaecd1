"""Mixed-variable Gaussian process surrogate.

The covariance is assembled per variable: squared-exponential factors for
continuous variables, the same with a rounding transform for integers,
compound-symmetry matrices for nominal variables, index-based
squared-exponential factors for ordinals, and one-dimensional kernels per
meta variable.  Categorical and standard factors only apply to point pairs
sharing the same meta component; pairs with different meta components are
correlated through the meta factors alone.

Standard and meta inputs are range-normalized to [0, 1] per scope before any
kernel evaluation, so weight bounds are scale-free.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import linalg

from .blackbox import cache_key
from .domain import (Domain, GROUPS, MetaComponent, Point, VariableType, normalize,
                     round_half_away)
from .errors import FactorizationError, FittingError, KernelDomainError

JITTER_FRACTION = 1e-8
MAX_JITTER_FRACTION = 1e-2


@dataclass
class KernelConfig:
    """Hyperparameters of the mixed kernel.

    Weights are positive squared-exponential coefficients keyed by variable
    id.  In matrix mode each nominal variable carries a compound-symmetry
    off-diagonal correlation in [0, 1) and each ordinal variable a positive
    lengthscale on its level index.  In encoded mode each categorical
    variable carries one weight applied to all of its encoded dimensions.
    """

    continuous_weights: dict = field(default_factory=dict)
    integer_weights: dict = field(default_factory=dict)
    categorical_mode: str = "matrix"  # "matrix" | "encoded"
    categorical_weights: dict = field(default_factory=dict)
    nominal_correlations: dict = field(default_factory=dict)
    ordinal_lengthscales: dict = field(default_factory=dict)
    meta_correlations: dict = field(default_factory=dict)
    meta_weights: dict = field(default_factory=dict)
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.categorical_mode not in ("matrix", "encoded"):
            raise KernelDomainError(f"unknown categorical mode {self.categorical_mode!r}")
        for name in ("continuous_weights", "integer_weights", "categorical_weights",
                     "meta_weights", "ordinal_lengthscales"):
            for key, value in getattr(self, name).items():
                if not value > 0:
                    raise KernelDomainError(f"{name}[{key!r}] must be positive, got {value}")
        for name in ("nominal_correlations", "meta_correlations"):
            for key, value in getattr(self, name).items():
                if not 0.0 <= value < 1.0:
                    raise KernelDomainError(f"{name}[{key!r}] must lie in [0, 1), got {value}")
        if not self.signal_variance > 0:
            raise KernelDomainError("signal variance must be positive")

    @property
    def jitter(self) -> float:
        return JITTER_FRACTION * self.signal_variance

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "KernelConfig":
        return cls(**data)


def merge_kernel_overrides(domain: Domain, mode: str, overrides: dict) -> KernelConfig:
    """Default config with entries overridden from a serialized (partial) dict."""
    config = default_kernel_config(domain, mode)
    for table in _SLOT_TABLES:
        for key, value in overrides.get(table, {}).items():
            if key in getattr(config, table):
                getattr(config, table)[key] = value
    if "signal_variance" in overrides:
        config.signal_variance = overrides["signal_variance"]
    return KernelConfig.from_dict(config.to_dict())  # re-validate bounds


#: Default cross-meta couplings are kept weak.  Pairs with different meta
#: components are correlated through the meta factors alone, without the
#: categorical/standard damping, so large meta correlations can make the
#: piecewise kernel indefinite.  Fitting may raise them only while the
#: likelihood stays factorizable.
DEFAULT_META_CORRELATION = 0.1
DEFAULT_META_WEIGHT = 2.0


def default_kernel_config(domain: Domain, mode: str = "matrix") -> KernelConfig:
    config = KernelConfig(categorical_mode=mode)
    for v in domain.variables:
        if v.type == VariableType.CONTINUOUS:
            config.continuous_weights[v.id] = 1.0
        elif v.type == VariableType.INTEGER:
            config.integer_weights[v.id] = 1.0
        elif v.type in GROUPS["categorical"]:
            if mode == "encoded":
                config.categorical_weights[v.id] = 1.0
            elif v.type == VariableType.ORDINAL:
                config.ordinal_lengthscales[v.id] = 1.0
            else:
                config.nominal_correlations[v.id] = 0.5
        elif v.type == VariableType.META_CATEGORICAL:
            config.meta_correlations[v.id] = DEFAULT_META_CORRELATION
        else:
            config.meta_weights[v.id] = DEFAULT_META_WEIGHT
    return config


# ---------------------------------------------------------------------------
# Scalar kernel operations (component level)
# ---------------------------------------------------------------------------

class MixedKernel:
    """Kernel evaluations bound to a domain, a config and (optionally) an encoder."""

    def __init__(self, domain: Domain, config: KernelConfig, encoder=None):
        self.domain = domain
        self.config = config
        self.encoder = encoder
        if config.categorical_mode == "encoded" and encoder is None:
            raise KernelDomainError("encoded categorical mode needs an encoder")

    # -- helpers -----------------------------------------------------------------

    def _standard_vector(self, component: dict, ids, transform=False) -> np.ndarray:
        if set(component) != set(ids):
            raise KernelDomainError(
                f"component over {sorted(component)} does not match acting set {ids}")
        out = np.empty(len(ids))
        for i, vid in enumerate(ids):
            value = component[vid]
            if transform:
                value = round_half_away(float(value))
            out[i] = normalize(self.domain.spec(vid).scope, value)
        return out

    def _weights(self, ids, table) -> np.ndarray:
        return np.array([table[vid] for vid in ids]) if ids else np.empty(0)

    # -- component kernels ----------------------------------------------------------

    def k_continuous(self, xc: dict, yc: dict, xm: MetaComponent) -> float:
        """exp(-sum of weighted squared differences) over acting continuous variables."""
        ids = self.domain.acting_index_set(xm, "continuous")
        a = self._standard_vector(xc, ids)
        b = self._standard_vector(yc, ids)
        w = self._weights(ids, self.config.continuous_weights)
        return float(np.exp(-np.sum(w * (a - b) ** 2)))

    def k_integer(self, xz: dict, yz: dict, xm: MetaComponent) -> float:
        """Like the continuous kernel after rounding relaxed values half away
        from zero, making each one-dimensional factor piecewise constant."""
        ids = self.domain.acting_index_set(xm, "integer")
        a = self._standard_vector(xz, ids, transform=True)
        b = self._standard_vector(yz, ids, transform=True)
        w = self._weights(ids, self.config.integer_weights)
        return float(np.exp(-np.sum(w * (a - b) ** 2)))

    def k_standard(self, xs: dict, ys: dict, xm: MetaComponent) -> float:
        ids_z = set(self.domain.acting_index_set(xm, "integer"))
        xz = {k: v for k, v in xs.items() if k in ids_z}
        yz = {k: v for k, v in ys.items() if k in ids_z}
        xc = {k: v for k, v in xs.items() if k not in ids_z}
        yc = {k: v for k, v in ys.items() if k not in ids_z}
        return self.k_integer(xz, yz, xm) * self.k_continuous(xc, yc, xm)

    def k_categorical(self, xq: dict, yq: dict, xm: MetaComponent) -> float:
        ids = self.domain.acting_index_set(xm, "categorical")
        if set(xq) != set(ids) or set(yq) != set(ids):
            raise KernelDomainError(
                f"categorical components must cover the acting set {ids}")
        if self.config.categorical_mode == "encoded":
            a = self.encoder.encode(xq, xm)
            b = self.encoder.encode(yq, xm)
            weights = np.concatenate([
                np.full(self.encoder.width(vid), self.config.categorical_weights[vid])
                for vid in ids]) if ids else np.empty(0)
            return float(np.exp(-np.sum(weights * (a - b) ** 2)))
        value = 1.0
        for vid in ids:
            spec = self.domain.spec(vid)
            xi, yi = xq[vid], yq[vid]
            if spec.type == VariableType.ORDINAL:
                ell = self.config.ordinal_lengthscales[vid]
                value *= math.exp(-((xi - yi) ** 2) / (2.0 * ell ** 2))
            elif xi != yi:
                value *= self.config.nominal_correlations[vid]
        return value

    def k_meta(self, xm: MetaComponent, ym: MetaComponent) -> float:
        """Product of the one-dimensional meta kernels."""
        value = 1.0
        for mid in self.domain.meta_ids:
            spec = self.domain.spec(mid)
            a, b = xm[mid], ym[mid]
            if spec.type == VariableType.META_CATEGORICAL:
                if a != b:
                    value *= self.config.meta_correlations[mid]
            else:
                w = self.config.meta_weights[mid]
                d = normalize(spec.scope, a) - normalize(spec.scope, b)
                value *= math.exp(-w * d * d)
        return value

    def k_mixed(self, x: Point, y: Point) -> float:
        """Full covariance between two points.

        Categorical and standard factors enter only when both points share
        the same meta component; otherwise the meta factors stand alone.
        """
        value = self.config.signal_variance * self.k_meta(x.meta, y.meta)
        if x.meta == y.meta:
            value *= self.k_categorical(x.categorical, y.categorical, x.meta)
            value *= self.k_standard(x.standard, y.standard, x.meta)
        return value


# ---------------------------------------------------------------------------
# Vectorized pair tensors (used for Gram matrices and batched prediction)
# ---------------------------------------------------------------------------

class SampleFeatures:
    """Per-sample arrays extracted once from a list of points."""

    def __init__(self, domain: Domain, points, encoder=None):
        self.n = len(points)
        self.meta_key = [tuple(sorted(p.meta.items())) for p in points]
        self.meta_num = {}
        self.meta_cat = {}
        for mid in domain.meta_ids:
            spec = domain.spec(mid)
            if spec.type == VariableType.META_CATEGORICAL:
                self.meta_cat[mid] = np.array([spec.scope.index(p.meta[mid])
                                               for p in points])
            else:
                self.meta_num[mid] = np.array([normalize(spec.scope, p.meta[mid])
                                               for p in points])
        self.acting = {}
        self.standard = {}
        self.category = {}
        self.encoded = {}
        for v in domain.variables:
            if v.type.is_meta:
                continue
            acting = np.array([v.id in p.categorical or v.id in p.standard
                               for p in points])
            self.acting[v.id] = acting
            if v.type in GROUPS["standard"]:
                values = np.zeros(self.n)
                for i, p in enumerate(points):
                    if acting[i]:
                        raw = p.standard[v.id]
                        if v.type == VariableType.INTEGER:
                            raw = round_half_away(float(raw))
                        values[i] = normalize(v.scope, raw)
                self.standard[v.id] = values
            else:
                idx = np.zeros(self.n, dtype=int)
                for i, p in enumerate(points):
                    if acting[i]:
                        idx[i] = p.categorical[v.id]
                self.category[v.id] = idx
                if encoder is not None:
                    block = np.zeros((self.n, encoder.width(v.id)))
                    for i, p in enumerate(points):
                        if acting[i]:
                            block[i] = encoder.encode_variable(v.id, p.categorical[v.id])
                    self.encoded[v.id] = block


class PairTensors:
    """Config-independent pairwise quantities between two feature sets.

    Building these once makes every kernel-hyperparameter evaluation a handful
    of elementwise array operations.
    """

    def __init__(self, domain: Domain, fa: SampleFeatures, fb: SampleFeatures):
        self.domain = domain
        self.shape = (fa.n, fb.n)
        keys_a = np.empty(fa.n, dtype=object)
        keys_a[:] = fa.meta_key
        keys_b = np.empty(fb.n, dtype=object)
        keys_b[:] = fb.meta_key
        self.same_meta = keys_a[:, None] == keys_b[None, :]
        self.meta_num_sq = {mid: (fa.meta_num[mid][:, None] - fb.meta_num[mid][None, :]) ** 2
                            for mid in fa.meta_num}
        self.meta_cat_diff = {mid: fa.meta_cat[mid][:, None] != fb.meta_cat[mid][None, :]
                              for mid in fa.meta_cat}
        self.mask = {vid: self.same_meta & fa.acting[vid][:, None] & fb.acting[vid][None, :]
                     for vid in fa.acting}
        self.standard_sq = {vid: (fa.standard[vid][:, None] - fb.standard[vid][None, :]) ** 2
                            for vid in fa.standard}
        self.category_diff = {vid: fa.category[vid][:, None] != fb.category[vid][None, :]
                              for vid in fa.category}
        self.category_sq = {vid: (fa.category[vid][:, None].astype(float)
                                  - fb.category[vid][None, :]) ** 2
                            for vid in fa.category}
        self.encoded_sq = {}
        for vid, block_a in fa.encoded.items():
            block_b = fb.encoded[vid]
            self.encoded_sq[vid] = ((block_a ** 2).sum(axis=1)[:, None]
                                    + (block_b ** 2).sum(axis=1)[None, :]
                                    - 2.0 * block_a @ block_b.T)


def correlation_matrix(pairs: PairTensors, config: KernelConfig) -> np.ndarray:
    """Kernel matrix without the signal variance factor."""
    domain = pairs.domain
    out = np.ones(pairs.shape)
    for mid, sq in pairs.meta_num_sq.items():
        out *= np.exp(-config.meta_weights[mid] * sq)
    for mid, diff in pairs.meta_cat_diff.items():
        out *= np.where(diff, config.meta_correlations[mid], 1.0)
    for vid, mask in pairs.mask.items():
        spec = domain.spec(vid)
        if spec.type == VariableType.CONTINUOUS:
            factor = np.exp(-config.continuous_weights[vid] * pairs.standard_sq[vid])
        elif spec.type == VariableType.INTEGER:
            factor = np.exp(-config.integer_weights[vid] * pairs.standard_sq[vid])
        elif config.categorical_mode == "encoded":
            factor = np.exp(-config.categorical_weights[vid] * pairs.encoded_sq[vid])
        elif spec.type == VariableType.ORDINAL:
            ell = config.ordinal_lengthscales[vid]
            factor = np.exp(-pairs.category_sq[vid] / (2.0 * ell ** 2))
        else:
            factor = np.where(pairs.category_diff[vid],
                              config.nominal_correlations[vid], 1.0)
        out *= np.where(mask, factor, 1.0)
    return out


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

def _factorize(matrix: np.ndarray, signal_variance: float):
    """Cholesky with jitter escalation (x10 up to the ceiling fraction)."""
    jitter = JITTER_FRACTION * signal_variance
    eye = np.eye(matrix.shape[0])
    while True:
        try:
            return linalg.cho_factor(matrix + jitter * eye, lower=True), jitter
        except linalg.LinAlgError:
            jitter *= 10.0
            if jitter > MAX_JITTER_FRACTION * signal_variance * (1 + 1e-12):
                raise FactorizationError(
                    "kernel matrix stayed indefinite up to the jitter ceiling") from None


class GPModel:
    """Noise-free zero-mean GP conditioned on evaluated points.

    Immutable once constructed; fitting hyperparameters happens separately in
    :func:`fit_hyperparameters`.
    """

    def __init__(self, domain: Domain, points, values, config: KernelConfig,
                 encoder=None):
        if len(points) != len(values) or not points:
            raise ValueError("need matching, nonempty points and values")
        self.domain = domain
        self.config = config
        self.encoder = encoder
        self.kernel = MixedKernel(domain, config, encoder)
        self.points = list(points)
        self.values = np.asarray(values, dtype=float)
        self._features = SampleFeatures(domain, self.points, encoder)
        self._pairs = PairTensors(domain, self._features, self._features)
        gram = config.signal_variance * correlation_matrix(self._pairs, config)
        self._factor, self.jitter = _factorize(gram, config.signal_variance)
        self.alpha = linalg.cho_solve(self._factor, self.values)

    def __len__(self):
        return len(self.points)

    def features(self, points) -> SampleFeatures:
        """Extract prediction features once; reusable across models sharing
        the same domain and encoder."""
        return SampleFeatures(self.domain, points, self.encoder)

    def cross_covariance(self, points) -> np.ndarray:
        """kappa matrix of shape (n_train, len(points))."""
        features = points if isinstance(points, SampleFeatures) else self.features(points)
        pairs = PairTensors(self.domain, self._features, features)
        return self.config.signal_variance * correlation_matrix(pairs, self.config)

    def predict_batch(self, points):
        kappa = self.cross_covariance(points)
        mean = kappa.T @ self.alpha
        solved = linalg.cho_solve(self._factor, kappa)
        # k(x, x) equals the signal variance exactly: every factor is 1.
        variance = self.config.signal_variance - np.sum(kappa * solved, axis=0)
        return mean, np.maximum(variance, 0.0)

    def mean_batch(self, points) -> np.ndarray:
        """Posterior means only (no variance solve)."""
        return self.cross_covariance(points).T @ self.alpha

    def predict(self, point: Point):
        mean, variance = self.predict_batch([point])
        return float(mean[0]), float(variance[0])

    def dump(self, path):
        """Write samples and config to a JSON file for inspection."""
        payload = {
            "config": self.config.to_dict(),
            "jitter": self.jitter,
            "samples": [
                {"meta": dict(p.meta), "categorical": dict(p.categorical),
                 "standard": dict(p.standard), "value": float(y), "key": cache_key(p)}
                for p, y in zip(self.points, self.values)
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)


def log_marginal_likelihood(domain: Domain, points, values, config: KernelConfig,
                            encoder=None) -> float:
    """-1/2 y^T K^-1 y - 1/2 log|K| - n/2 log(2 pi), with the model's base jitter."""
    features = SampleFeatures(domain, points, encoder)
    pairs = PairTensors(domain, features, features)
    y = np.asarray(values, dtype=float)
    gram = config.signal_variance * correlation_matrix(pairs, config)
    gram = gram + config.jitter * np.eye(len(points))
    try:
        factor = linalg.cho_factor(gram, lower=True)
    except linalg.LinAlgError:
        return -math.inf
    alpha = linalg.cho_solve(factor, y)
    logdet = 2.0 * np.sum(np.log(np.diag(factor[0])))
    n = len(points)
    return float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * n * math.log(2 * math.pi))


# ---------------------------------------------------------------------------
# Hyperparameter fitting
# ---------------------------------------------------------------------------

WEIGHT_BOUNDS = (1e-3, 1e3)
CORRELATION_BOUNDS = (0.0, 0.99)
LENGTHSCALE_BOUNDS = (1e-2, 1e2)

_SLOT_TABLES = {
    "continuous_weights": ("log", WEIGHT_BOUNDS),
    "integer_weights": ("log", WEIGHT_BOUNDS),
    "categorical_weights": ("log", WEIGHT_BOUNDS),
    "meta_weights": ("log", WEIGHT_BOUNDS),
    "ordinal_lengthscales": ("log", LENGTHSCALE_BOUNDS),
    "nominal_correlations": ("raw", CORRELATION_BOUNDS),
    "meta_correlations": ("raw", CORRELATION_BOUNDS),
}


def _config_slots(config: KernelConfig):
    slots = []
    for table, (kind, bounds) in _SLOT_TABLES.items():
        for key in getattr(config, table):
            slots.append((table, key, kind, bounds))
    return slots


def _profiled_lml(pairs: PairTensors, y: np.ndarray, config: KernelConfig):
    """LML with the signal variance profiled out analytically.

    Returns (lml, profiled signal variance); (-inf, None) on factorization
    failure.
    """
    n = len(y)
    matrix = correlation_matrix(pairs, config) + JITTER_FRACTION * np.eye(n)
    try:
        factor = linalg.cho_factor(matrix, lower=True)
    except linalg.LinAlgError:
        return -math.inf, None
    alpha = linalg.cho_solve(factor, y)
    sigma2 = max(float(y @ alpha) / n, 1e-12)
    logdet = 2.0 * np.sum(np.log(np.diag(factor[0])))
    lml = -0.5 * n * math.log(sigma2) - 0.5 * logdet - 0.5 * n * (1 + math.log(2 * math.pi))
    return float(lml), sigma2


def fit_hyperparameters(domain: Domain, points, values, seed: int = 0,
                        mode: str = "matrix", encoder=None,
                        starts: int = 8, sweeps: int = 8,
                        base: KernelConfig | None = None) -> KernelConfig:
    """Maximize the log marginal likelihood by multi-start coordinate search.

    Weight-like parameters move in log space within their box bounds;
    correlations move in raw space within [0, 0.99].  The base config (the
    default one unless overridden) is always one of the starts, so the result
    never has lower likelihood than it.  Deterministic for a fixed seed.
    """
    if len(points) < 2:
        raise FittingError("hyperparameter fitting needs at least 2 samples")
    rng = np.random.default_rng(seed)
    defaults = default_kernel_config(domain, mode)
    if base is not None:
        for table in _SLOT_TABLES:
            getattr(defaults, table).update(
                {k: v for k, v in getattr(base, table).items()
                 if k in getattr(defaults, table)})
    base = defaults
    slots = _config_slots(base)
    features = SampleFeatures(domain, points, encoder)
    pairs = PairTensors(domain, features, features)
    y = np.asarray(values, dtype=float)

    def build(params):
        config = default_kernel_config(domain, mode)
        for (table, key, _, _), value in zip(slots, params):
            getattr(config, table)[key] = value
        return config

    def objective(params):
        return _profiled_lml(pairs, y, build(params))[0]

    def random_start():
        params = []
        for _, _, kind, (lo, hi) in slots:
            if kind == "log":
                params.append(float(np.exp(rng.uniform(math.log(lo), math.log(hi)))))
            else:
                params.append(float(rng.uniform(lo, hi)))
        return params

    best_params, best_value = None, -math.inf
    for attempt in range(starts):
        params = ([getattr(base, t)[k] for t, k, _, _ in slots] if attempt == 0
                  else random_start())
        value = objective(params)
        step = 1.0  # log-space / raw-space half-width of the compass move
        for _ in range(sweeps):
            moved = False
            for i, (_, _, kind, (lo, hi)) in enumerate(slots):
                for direction in (1.0, -1.0):
                    trial = list(params)
                    if kind == "log":
                        trial[i] = float(np.clip(params[i] * math.exp(direction * step),
                                                 lo, hi))
                    else:
                        trial[i] = float(np.clip(params[i] + direction * 0.2 * step, lo, hi))
                    if trial[i] == params[i]:
                        continue
                    trial_value = objective(trial)
                    if trial_value > value:
                        params, value = trial, trial_value
                        moved = True
                        break
            if not moved:
                step *= 0.5
                if step < 0.05:
                    break
        if value > best_value:
            best_params, best_value = params, value
    if best_params is None or best_value == -math.inf:
        raise FittingError("all fitting starts failed to factorize the kernel matrix")
    config = build(best_params)
    config.signal_variance = _profiled_lml(pairs, y, config)[1]
    return config
