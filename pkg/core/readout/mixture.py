"""Maximum-likelihood fits of Gaussian mixtures to binned counts.

Bin counts are Poisson distributed, so the fits maximize the Poisson
likelihood of the histogram instead of least squares. Internally the
objective is the Poisson deviance divided by the total count, which is zero
for a perfect fit and well scaled for L-BFGS-B.

1-D bins integrate the Gaussians exactly (CDF differences); 2-D bins use the
density at the bin centre times the bin area.
"""

import logging
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import linear_sum_assignment, minimize
from scipy.special import gammaln, xlogy
from scipy.stats import chi2, norm

from core.models.quantum import QuantumLevel
from core.models.readout import Histogram, MixtureFit

logger = logging.getLogger(__name__)

_MIN_RATE = 1e-300
_MIN_SIGMA_REL = 1e-9
_KMEANS_ITERATIONS = 100
_LOG_2PI = np.log(2.0 * np.pi)
# a component pair closer than this many pooled widths is one peak
_MIN_SEPARATION = 1.0
_COLLAPSE_P_VALUE = 1e-6


class FitConvergenceError(RuntimeError):
    """Raised when the optimizer hits its iteration cap without converging."""

    pass


class SingularCovarianceError(ValueError):
    """Raised when a fitted component collapses onto a point."""

    pass


class _PoissonDeviance:
    def __init__(self, counts: np.ndarray):
        self.n = np.asarray(counts, dtype=float).ravel()
        self.total = float(self.n.sum())
        if self.total <= 0:
            raise ValueError("histogram has no counts")
        self.const = float(np.sum(xlogy(self.n, self.n) - self.n - gammaln(self.n + 1)))

    def __call__(self, nu: np.ndarray, dnu: Optional[np.ndarray] = None):
        nu = np.maximum(nu, _MIN_RATE)
        value = float(np.sum(nu - self.n + xlogy(self.n, self.n) - xlogy(self.n, nu))) / self.total
        if dnu is None:
            return value
        return value, dnu.T @ (1.0 - self.n / nu) / self.total

    def log_likelihood(self, value: float) -> float:
        return -value * self.total + self.const


class _Gaussian1D:
    """theta = [log b_k, mu_k, log sigma_k (or one shared)], amplitudes a_k = N b_k."""

    def __init__(self, hist: Histogram, k: int, equal_variance: bool):
        self.edges = hist.edges
        self.k = k
        self.equal_variance = equal_variance
        self.total = hist.total

    def pack(self, b, mu, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        log_sigma = np.log([sigma.mean()]) if self.equal_variance else np.log(sigma)
        return np.concatenate([np.log(np.maximum(b, 1e-12)), mu, log_sigma])

    def unpack(self, theta):
        k = self.k
        b = np.exp(theta[:k])
        mu = theta[k : 2 * k]
        sigma = np.exp(theta[2 * k :]) * np.ones(k)
        return b, mu, sigma

    def expected(self, theta):
        b, mu, sigma = self.unpack(theta)
        a = self.total * b
        z = (self.edges[None, :] - mu[:, None]) / sigma[:, None]
        pdf = norm.pdf(z)
        mass = np.diff(norm.cdf(z), axis=1)
        nu = a @ mass
        d_logb = (a[:, None] * mass).T
        d_mu = (a[:, None] * (-np.diff(pdf, axis=1) / sigma[:, None])).T
        d_logs = (a[:, None] * (-np.diff(pdf * z, axis=1))).T
        if self.equal_variance:
            d_logs = d_logs.sum(axis=1, keepdims=True)
        return nu, np.hstack([d_logb, d_mu, d_logs])

    def to_fit(self, theta):
        b, mu, sigma = self.unpack(theta)
        return mu, sigma**2, self.total * b


class _Gaussian2D:
    """theta = [log b_k, mu_k (2), Cholesky (log l11, l21, log l22) per component or shared]."""

    def __init__(self, hist: Histogram, k: int, equal_variance: bool):
        cu, cw = hist.centers, hist.centers_y
        self.points = np.stack(np.meshgrid(cu, cw, indexing="ij"), axis=-1).reshape(-1, 2)
        self.area = np.outer(np.diff(hist.edges), np.diff(hist.edges_y)).ravel()
        self.k = k
        self.equal_variance = equal_variance
        self.total = hist.total

    def pack(self, b, mu, cov) -> np.ndarray:
        chol = [np.linalg.cholesky(c) for c in cov]
        if self.equal_variance:
            chol = [np.linalg.cholesky(np.mean(cov, axis=0))]
        chol_params = np.concatenate([[np.log(l[0, 0]), l[1, 0], np.log(l[1, 1])] for l in chol])
        return np.concatenate([np.log(np.maximum(b, 1e-12)), np.ravel(mu), chol_params])

    def unpack(self, theta):
        k = self.k
        b = np.exp(theta[:k])
        mu = theta[k : 3 * k].reshape(k, 2)
        chol = theta[3 * k :].reshape(-1, 3)
        if self.equal_variance:
            chol = np.repeat(chol, k, axis=0)
        return b, mu, chol

    def expected(self, theta):
        b, mu, chol = self.unpack(theta)
        a = self.total * b
        nu = np.zeros(len(self.points))
        d_logb = np.empty((len(self.points), self.k))
        d_mu = np.empty((len(self.points), 2 * self.k))
        d_chol = np.empty((len(self.points), 3 * self.k))
        for j in range(self.k):
            l11, l21, l22 = np.exp(chol[j, 0]), chol[j, 1], np.exp(chol[j, 2])
            d = self.points - mu[j]
            r1 = d[:, 0] / l11
            r2 = (d[:, 1] - l21 * r1) / l22
            log_p = -0.5 * (r1**2 + r2**2) - _LOG_2PI - np.log(l11) - np.log(l22)
            mass = a[j] * np.exp(log_p) * self.area
            nu += mass
            v2 = r2 / l22
            v1 = (r1 - l21 * v2) / l11
            d_logb[:, j] = mass
            d_mu[:, 2 * j] = mass * v1
            d_mu[:, 2 * j + 1] = mass * v2
            d_chol[:, 3 * j] = mass * (l11 * v1 * r1 - 1.0)
            d_chol[:, 3 * j + 1] = mass * v2 * r1
            d_chol[:, 3 * j + 2] = mass * (l22 * v2 * r2 - 1.0)
        if self.equal_variance:
            d_chol = d_chol.reshape(len(self.points), self.k, 3).sum(axis=1)
        return nu, np.hstack([d_logb, d_mu, d_chol])

    def to_fit(self, theta):
        b, mu, chol = self.unpack(theta)
        cov = []
        for l11, l21, l22 in chol:
            l = np.array([[np.exp(l11), 0.0], [l21, np.exp(l22)]])
            cov.append(l @ l.T)
        return mu, np.array(cov), self.total * b


def _weighted_kmeans(points: np.ndarray, weights: np.ndarray, centers: np.ndarray):
    centers = np.array(centers, dtype=float)
    labels = np.zeros(len(points), dtype=int)
    for _ in range(_KMEANS_ITERATIONS):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        new_labels = dist.argmin(axis=1)
        for j in range(len(centers)):
            mask = (new_labels == j) & (weights > 0)
            if weights[mask].sum() > 0:
                centers[j] = np.average(points[mask], axis=0, weights=weights[mask])
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels


def _moments(points, weights, labels, k, floor):
    """Per-cluster amplitude fraction, mean and covariance."""
    total = weights.sum()
    dim = points.shape[1]
    b, mu, cov = np.zeros(k), np.zeros((k, dim)), np.zeros((k, dim, dim))
    for j in range(k):
        mask = labels == j
        w = weights[mask]
        if w.sum() <= 0:
            b[j] = 1e-3
            mu[j] = np.average(points, axis=0, weights=weights)
            cov[j] = np.diag(np.full(dim, floor))
            continue
        b[j] = w.sum() / total
        mu[j] = np.average(points[mask], axis=0, weights=w)
        centered = points[mask] - mu[j]
        cov[j] = (centered * w[:, None]).T @ centered / w.sum() + np.eye(dim) * floor
    return b, mu, cov


def _start_centers(points: np.ndarray, weights: np.ndarray, k: int) -> list[np.ndarray]:
    """Deterministic k-means seeds: histogram quantiles and support extremes (1-D),
    farthest-point seeding from the fullest bin (2-D)."""
    occupied = points[weights > 0]
    if points.shape[1] == 1:
        x = points[:, 0]
        cdf = np.cumsum(weights) / weights.sum()
        quantiles = [x[min(np.searchsorted(cdf, (j + 0.5) / k), len(x) - 1)] for j in range(k)]
        extremes = np.linspace(occupied[:, 0].min(), occupied[:, 0].max(), k)
        return [np.array(quantiles)[:, None], extremes[:, None]]

    significant = points[weights >= 0.01 * weights.max()]
    chosen = [points[weights.argmax()]]
    while len(chosen) < k:
        dist = np.min([((significant - c) ** 2).sum(axis=1) for c in chosen], axis=0)
        chosen.append(significant[dist.argmax()])
    return [np.array(chosen)]


def _label_components(means: np.ndarray, initial: Optional[MixtureFit]) -> list[QuantumLevel]:
    k = len(means)
    if initial is not None:
        ref = np.asarray(initial.means, dtype=float).reshape(k, -1)
        cost = ((means.reshape(k, -1)[:, None, :] - ref[None, :, :]) ** 2).sum(axis=-1)
        rows, cols = linear_sum_assignment(cost)
        levels = [QuantumLevel.G] * k
        for r, c in zip(rows, cols):
            levels[r] = initial.levels[c]
        return levels
    if means.ndim == 1:
        order = np.argsort(means)
        levels = [QuantumLevel.G] * k
        for rank, idx in enumerate(order):
            levels[idx] = QuantumLevel(rank)
        return levels
    # 2-D: g has the lowest U; f is the remaining component with the largest W
    levels = [QuantumLevel.E] * k
    g = int(np.argmin(means[:, 0]))
    levels[g] = QuantumLevel.G
    rest = [j for j in range(k) if j != g]
    if k == 3:
        f = max(rest, key=lambda j: means[j, 1])
        levels[f] = QuantumLevel.F
    return levels


def _sorted_by_level(means, covs, amps, levels):
    order = np.argsort([int(lvl) for lvl in levels])
    return means[order], covs[order], amps[order], [levels[i] for i in order]


def _free_model(hist: Histogram, k: int, equal_variance: bool):
    if hist.ndim == 1:
        model = _Gaussian1D(hist, k, equal_variance)
        points = hist.centers[:, None]
        floor = float(np.min(np.diff(hist.edges))) ** 2
    else:
        model = _Gaussian2D(hist, k, equal_variance)
        points = model.points
        floor = float(min(np.diff(hist.edges).min(), np.diff(hist.edges_y).min())) ** 2
    return model, points, floor


def _fit_free(
    hist: Histogram,
    k: int,
    objective: _PoissonDeviance,
    equal_variance: bool,
    max_iter: int,
    tol: float,
    initial: Optional[MixtureFit] = None,
):
    """Best L-BFGS-B run over the k-means (and `initial`) start points: (model, result, history)."""
    model, points, floor = _free_model(hist, k, equal_variance)
    weights = np.asarray(hist.counts, dtype=float).ravel()

    starts = []
    for centers in _start_centers(points, weights, k):
        centers, labels = _weighted_kmeans(points, weights, centers)
        b, mu, cov = _moments(points, weights, labels, k, floor)
        if hist.ndim == 1:
            starts.append(model.pack(b, mu[:, 0], np.sqrt(cov[:, 0, 0])))
        else:
            starts.append(model.pack(b, mu, cov))
    if initial is not None:
        b0 = initial.populations
        if hist.ndim == 1:
            starts.append(model.pack(b0, initial.means, initial.sigmas))
        else:
            starts.append(model.pack(b0, initial.means, initial.covariances))

    def fun(theta):
        nu, dnu = model.expected(theta)
        return objective(nu, dnu)

    best, best_history = None, []
    for theta0 in starts:
        history: list[float] = []

        def record(xk):
            history.append(objective.log_likelihood(objective(model.expected(xk)[0])))

        res = minimize(
            fun,
            theta0,
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-10},
        )
        if not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best, best_history = res, history

    if best is None:
        raise FitConvergenceError("no start point produced a finite likelihood")
    if not (best.success or best.nit < max_iter):
        raise FitConvergenceError(
            f"mixture fit did not converge in {max_iter} iterations: {best.message}"
        )
    return model, best, best_history


def _separations(means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Pairwise distance of component means in units of their pooled width."""
    k = len(means)
    sep = np.full((k, k), np.inf)
    for i in range(k):
        for j in range(i + 1, k):
            d = np.atleast_1d(means[i] - means[j])
            pooled = np.atleast_2d(0.5 * (covs[i] + covs[j]))
            sep[i, j] = sep[j, i] = float(np.sqrt(d @ np.linalg.solve(pooled, d)))
    return sep


def _params_per_component(ndim: int, equal_variance: bool) -> int:
    shape = 0 if equal_variance else (1 if ndim == 1 else 3)
    return 1 + ndim + shape


def _collapse_redundant(
    hist: Histogram,
    objective: _PoissonDeviance,
    means: np.ndarray,
    covs: np.ndarray,
    amps: np.ndarray,
    deviance: float,
    equal_variance: bool,
    max_iter: int,
    tol: float,
):
    """Drop one component when the data do not support all of them.

    A pair of means closer than `_MIN_SEPARATION` pooled widths, or a
    likelihood gain over the (k-1)-component fit below the chi-square cut,
    means one component is splitting a single peak. The (k-1) fit then
    replaces the survivors and the dropped component keeps its place with
    amplitude 0. Returns None when all components are kept.
    """
    k = len(amps)
    sep = _separations(means, covs)
    i, j = np.unravel_index(np.argmin(sep), sep.shape)
    try:
        reduced_model, reduced, _ = _fit_free(hist, k - 1, objective, equal_variance, max_iter, tol)
    except FitConvergenceError:
        return None
    gain = objective.log_likelihood(deviance) - objective.log_likelihood(reduced.fun)
    df = _params_per_component(hist.ndim, equal_variance)
    if sep[i, j] >= _MIN_SEPARATION and 2.0 * gain > chi2.isf(_COLLAPSE_P_VALUE, df):
        return None

    dropped = i if amps[i] <= amps[j] else j
    survivors = [c for c in range(k) if c != dropped]
    r_means, r_covs, r_amps = reduced_model.to_fit(reduced.x)
    cost = np.array(
        [[np.sum((np.atleast_1d(r_means[r]) - np.atleast_1d(means[s])) ** 2) for s in survivors]
         for r in range(k - 1)]
    )
    rows, cols = linear_sum_assignment(cost)
    means, covs, amps = means.copy(), covs.copy(), np.zeros(k)
    for r, c in zip(rows, cols):
        means[survivors[c]], covs[survivors[c]], amps[survivors[c]] = r_means[r], r_covs[r], r_amps[r]
    logger.info(
        "Mixture fit: %d components not supported (separation %.2f, gain %.1f); "
        "one amplitude set to 0", k, sep[i, j], gain,
    )
    return means, covs, amps, reduced


def fit_mixture(
    hist: Histogram,
    n_components: int,
    fixed_shape: Optional[MixtureFit] = None,
    equal_variance: bool = False,
    max_iter: int = 500,
    tol: float = 1e-9,
    initial: Optional[MixtureFit] = None,
) -> MixtureFit:
    """Fit a mixture of `n_components` Gaussians to `hist`.

    With `fixed_shape` only the amplitudes are free (means and covariances
    are taken from the earlier shape fit). `equal_variance` ties all
    components to one (co)variance, which helps weak readout fits.
    `initial` adds a start point and fixes the component labels.
    Data that carry fewer peaks than requested come back with one
    amplitude at 0.
    """
    if n_components not in (2, 3):
        raise ValueError(f"n_components must be 2 or 3, got {n_components}")
    if fixed_shape is not None:
        if fixed_shape.n_components != n_components or fixed_shape.ndim != hist.ndim:
            raise ValueError("fixed shape does not match the requested mixture")
        return fit_amplitudes(hist, fixed_shape, max_iter=max_iter, tol=tol)

    objective = _PoissonDeviance(hist.counts)
    if hist.ndim == 1:
        span = float(hist.edges[-1] - hist.edges[0])
    else:
        span = float(min(hist.edges[-1] - hist.edges[0], hist.edges_y[-1] - hist.edges_y[0]))
    model, best, best_history = _fit_free(
        hist, n_components, objective, equal_variance, max_iter, tol, initial
    )

    means, covs, amps = model.to_fit(best.x)
    scale = np.sqrt(covs) if hist.ndim == 1 else np.sqrt(np.linalg.eigvalsh(covs))
    if np.any(scale < _MIN_SIGMA_REL * span):
        raise SingularCovarianceError("a mixture component collapsed to zero width")

    deviance, iterations = best.fun, int(best.nit)
    collapsed = _collapse_redundant(
        hist, objective, means, covs, amps, best.fun, equal_variance, max_iter, tol
    )
    if collapsed is not None:
        means, covs, amps, reduced = collapsed
        deviance, iterations = reduced.fun, iterations + int(reduced.nit)

    levels = _label_components(means, initial)
    means, covs, amps, levels = _sorted_by_level(means, covs, amps, levels)
    fit = MixtureFit(
        means,
        covs,
        amps,
        levels,
        log_likelihood=objective.log_likelihood(deviance),
        iterations=iterations,
        converged=True,
        history=best_history,
    )
    logger.debug(
        "mixture fit: k=%d ndim=%d iterations=%d ll=%.3f populations=%s",
        n_components, hist.ndim, fit.iterations, fit.log_likelihood, fit.populations,
    )
    return fit


def component_masses(hist: Histogram, fit: MixtureFit) -> np.ndarray:
    """Probability mass of each normalized component in each bin, shape (n_bins, k)."""
    if hist.ndim != fit.ndim:
        raise ValueError("histogram and fit dimensionality differ")
    if hist.ndim == 1:
        z = (hist.edges[None, :] - fit.means[:, None]) / fit.sigmas[:, None]
        return np.diff(norm.cdf(z), axis=1).T
    model = _Gaussian2D(hist, fit.n_components, False)
    columns = []
    for mu, cov in zip(fit.means, fit.covariances):
        diff = model.points - mu
        inv = np.linalg.inv(cov)
        quad = np.einsum("ij,jk,ik->i", diff, inv, diff)
        density = np.exp(-0.5 * quad - _LOG_2PI - 0.5 * np.log(np.linalg.det(cov)))
        columns.append(density * model.area)
    return np.stack(columns, axis=1)


def expected_counts(hist: Histogram, fit: MixtureFit) -> np.ndarray:
    """Fitted counts per bin, in the histogram's bin layout."""
    return (component_masses(hist, fit) @ fit.amplitudes).reshape(hist.counts.shape)


def fit_amplitudes(
    hist: Histogram, shape: MixtureFit, max_iter: int = 500, tol: float = 1e-9
) -> MixtureFit:
    """Second step of population extraction: amplitudes only, shape held fixed."""
    objective = _PoissonDeviance(hist.counts)
    masses = component_masses(hist, shape)
    total = objective.total

    def fun(b):
        return objective(total * masses @ b, total * masses)

    history: list[float] = []
    b0 = np.full(shape.n_components, 1.0 / shape.n_components)
    res = minimize(
        fun,
        b0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * shape.n_components,
        callback=lambda b: history.append(objective.log_likelihood(fun(b)[0])),
        options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-12},
    )
    converged = bool(res.success or res.nit < max_iter)
    if not converged:
        raise FitConvergenceError(f"amplitude fit did not converge: {res.message}")
    return shape.with_amplitudes(
        total * np.maximum(res.x, 0.0),
        log_likelihood=objective.log_likelihood(res.fun),
        iterations=int(res.nit),
        converged=converged,
        history=history,
    )


def classify(u: float, fit: MixtureFit, w2: Optional[float] = None) -> QuantumLevel:
    """Assign one shot.

    1-D: midpoint thresholds between adjacent means; a value exactly on a
    threshold goes to the upper level. 2-D: the component with the highest
    density, amplitudes ignored.
    """
    values = np.array([[u, w2]]) if w2 is not None else np.array([u])
    return QuantumLevel(int(classify_array(values, fit)[0]))


def classify_array(values: np.ndarray, fit: MixtureFit) -> np.ndarray:
    """Vectorized classify: values shape (n,) for 1-D fits, (n, 2) for 2-D fits."""
    values = np.asarray(values, dtype=float)
    levels = np.array([int(lvl) for lvl in fit.levels])
    if fit.ndim == 1:
        if values.ndim != 1:
            raise ValueError("1-D fit needs scalar signals")
        order = np.argsort(fit.means)
        rank = np.searchsorted(np.asarray(fit.thresholds), values, side="right")
        return levels[order][rank]
    if values.ndim != 2 or values.shape[1] != 2:
        raise ValueError("2-D fit needs (u, w) pairs")
    scores = np.empty((len(values), fit.n_components))
    for j, (mu, cov) in enumerate(zip(fit.means, fit.covariances)):
        diff = values - mu
        quad = np.einsum("ij,jk,ik->i", diff, np.linalg.inv(cov), diff)
        scores[:, j] = -0.5 * quad - 0.5 * np.log(np.linalg.det(cov))
    return levels[scores.argmax(axis=1)]


def threshold_populations(values: np.ndarray, fit: MixtureFit) -> np.ndarray:
    """Populations by counting classified shots (biased by readout overlap)."""
    assigned = classify_array(values, fit)
    counts = np.array([np.sum(assigned == int(lvl)) for lvl in fit.levels], dtype=float)
    return counts / counts.sum()


def overlap(fit: MixtureFit, a: QuantumLevel = QuantumLevel.G, b: QuantumLevel = QuantumLevel.E) -> float:
    """Overlap integral of two normalized 1-D components, int min(N_a, N_b) dx."""
    if fit.ndim != 1:
        raise ValueError("overlap is defined for 1-D fits")
    i, j = fit.levels.index(a), fit.levels.index(b)
    mu = fit.means[[i, j]]
    sigma = fit.sigmas[[i, j]]
    x = np.linspace(mu.min() - 10 * sigma.max(), mu.max() + 10 * sigma.max(), 200_001)
    lower = np.minimum(norm.pdf(x, mu[0], sigma[0]), norm.pdf(x, mu[1], sigma[1]))
    return float(trapezoid(lower, x))


def snr(fit: MixtureFit) -> float:
    """|mu_g - mu_e| / sigma_g of a 1-D fit."""
    if fit.ndim != 1:
        raise ValueError("snr is defined for 1-D fits")
    g, e = fit.levels.index(QuantumLevel.G), fit.levels.index(QuantumLevel.E)
    return float(abs(fit.means[g] - fit.means[e]) / fit.sigmas[g])


def gaussian_pdf_curve(
    fit: MixtureFit, n_points: int = 512, width: float = 5.0
) -> tuple[np.ndarray, np.ndarray]:
    """Fitted 1-D density on a grid (x, amplitude-weighted pdf) for plotting."""
    x = np.linspace(
        (fit.means - width * fit.sigmas).min(), (fit.means + width * fit.sigmas).max(), n_points
    )
    y = sum(a * norm.pdf(x, m, s) for a, m, s in zip(fit.amplitudes, fit.means, fit.sigmas))
    return x, y


