## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import math
import functools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import interp1d
from scipy.special import beta as beta_fn, betainc

from . import config
from .types import ParameterError, GridRefinementError
from .steps import Steps as S
from .session import ensure_session


__all__ = [
    "GridSpec",
    "PriorModel",
    "InterpTables",
    "build_prior",
    "real_part_density",
    "conditional_mean_var",
    "build_interp_tables",
]


@dataclass(frozen=True)
class GridSpec:
    """
    Resolution of the prior tabulation and of the denoiser tables.  The
    amplitude tail is cut at its (1-ε) quantile.
    """

    tail_epsilon: float = config.TAIL_EPSILON
    core_width: float = config.CORE_WIDTH
    core_points: int = config.CORE_POINTS
    tail_points: int = config.TAIL_POINTS
    tolerance: float = config.PRIOR_TOLERANCE
    table_points: int = config.TABLE_POINTS
    table_width: float = config.TABLE_WIDTH


@dataclass(frozen=True, eq=False)
class PriorModel:
    """
    Mixture law of one real entry of X: point masses at `atoms`, plus a
    density tabulated on a sorted `grid`.  `scale` is the width of the bulk
    of the continuous part, used to size the denoiser tables.
    """

    atoms: np.ndarray
    atom_masses: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    max_amplitude: float = 0.0
    scale: float = 0.0

    @classmethod
    def point_mass(cls, value: float = 0.0):
        return cls.discrete([value], [1.0])

    @classmethod
    def discrete(cls, values, masses):
        values = np.asarray(values, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if values.shape != masses.shape or np.any(masses < 0.0):
            raise ParameterError("atoms need one non-negative mass each")
        return cls(
            atoms=values,
            atom_masses=masses / masses.sum(),
            grid=np.zeros(0),
            density=np.zeros(0),
            max_amplitude=float(np.abs(values).max(initial=0.0)),
            scale=float(np.abs(values).max(initial=0.0)),
        )

    @property
    def continuous_mass(self) -> float:
        if len(self.grid) < 2:
            return 0.0
        return float(trapezoid(self.density, self.grid))

    @property
    def total_mass(self) -> float:
        return float(self.atom_masses.sum()) + self.continuous_mass

    @property
    def mean(self) -> float:
        value = float(self.atom_masses @ self.atoms)
        if len(self.grid) >= 2:
            value += float(trapezoid(self.grid * self.density, self.grid))
        return value

    @property
    def variance(self) -> float:
        second = float(self.atom_masses @ self.atoms ** 2)
        if len(self.grid) >= 2:
            second += float(trapezoid(self.grid ** 2 * self.density, self.grid))
        return max(second - self.mean ** 2, 0.0)


def real_part_density(v, threshold: float, path_loss: float, max_amplitude: float) -> np.ndarray:
    """
    Unnormalized density of V = A cos Φ for a neighbor amplitude A with
    P(A > a) = (√θ/a)^(4/α), truncated at `max_amplitude`, and a uniform
    phase.  The inner integral over the amplitude reduces to an incomplete
    beta function in v²/a².
    """
    v = np.abs(np.asarray(v, dtype=float))
    beta = 4.0 / path_loss
    p = (beta + 1.0) / 2.0
    c0 = beta * threshold ** (beta / 2.0) / math.pi
    low = np.maximum(v, math.sqrt(threshold))

    density = np.zeros_like(v)
    inside = v < max_amplitude
    zero = inside & (v == 0.0)
    rest = inside & (v > 0.0)

    density[zero] = c0 * (low[zero] ** -(beta + 1.0) - max_amplitude ** -(beta + 1.0)) / (beta + 1.0)

    vr = v[rest]
    upper = betainc(p, 0.5, np.minimum(vr ** 2 / low[rest] ** 2, 1.0))
    lower = betainc(p, 0.5, vr ** 2 / max_amplitude ** 2)
    density[rest] = 0.5 * c0 * vr ** -(beta + 1.0) * beta_fn(p, 0.5) * (upper - lower)
    return density


@functools.lru_cache(maxsize=16)
def _tabulate_prior(threshold: float, path_loss: float, message_bits: int, spec: GridSpec) -> tuple:
    root = math.sqrt(threshold)
    max_amplitude = root * spec.tail_epsilon ** (-path_loss / 4.0)
    core_edge = min(spec.core_width * root, max_amplitude)

    core = np.linspace(0.0, core_edge, spec.core_points)
    tail = np.geomspace(core_edge, max_amplitude, spec.tail_points)[1:]
    half = np.concatenate([core, tail])
    grid = np.concatenate([-half[:0:-1], half])
    density = real_part_density(grid, threshold, path_loss, max_amplitude)
    # The endpoints sit exactly on the truncation, where the density vanishes.
    mass = float(trapezoid(density, grid))
    return grid, density, mass, max_amplitude, core_edge


def build_prior(threshold: float, path_loss: float, message_bits: int, spec: GridSpec = None,
                session=None) -> PriorModel:
    """
    Prior of one real entry of X: an atom of mass 1 - 2^-l at zero, and the
    real-part density of a neighbor coefficient scaled by 2^-l.
    """
    session = ensure_session(session)
    spec = spec or GridSpec()
    if not path_loss > 2.0:
        raise ParameterError("path-loss exponent must exceed 2", path_loss=path_loss)
    if not threshold > 0.0:
        raise ParameterError("neighbor threshold must be positive", threshold=threshold)

    with session.setup_log() as report:
        grid, density, mass, max_amplitude, core_edge = _tabulate_prior(
            float(threshold), float(path_loss), int(message_bits), spec
        )
        report(S.TabulateDensity, success=True, points=len(grid), max_amplitude=max_amplitude)

        expected = 1.0 - spec.tail_epsilon
        if abs(mass - expected) > spec.tolerance * expected:
            report(S.ValidatePriorMass, failure=True, mass=mass, expected=expected)
            raise GridRefinementError("prior grid too coarse to meet the normalization", mass=mass, expected=expected)
        report(S.ValidatePriorMass, success=True, mass=mass)

    return _assemble_prior(float(threshold), float(path_loss), int(message_bits), spec)


@functools.lru_cache(maxsize=64)
def _assemble_prior(threshold: float, path_loss: float, message_bits: int, spec: GridSpec) -> PriorModel:
    grid, density, mass, max_amplitude, core_edge = _tabulate_prior(threshold, path_loss, message_bits, spec)
    sparsity = 2.0 ** -message_bits
    density = density * (sparsity / mass)
    density.setflags(write=False)
    return PriorModel(
        atoms=np.zeros(1),
        atom_masses=np.array([1.0 - sparsity]),
        grid=grid,
        density=density,
        max_amplitude=max_amplitude,
        scale=core_edge,
    )


def _shared_nodes(y, s, grid):
    """
    Quadrature nodes valid for every observation of a sorted chunk: the
    prior grid within twelve deviations, refined to a quarter deviation.
    None when the chunk is too spread out for its smallest noise.
    """
    width = 12.0 * s.max()
    low, high = max(y.min() - width, grid[0]), min(y.max() + width, grid[-1])
    if not high > low:
        return None
    count = int(math.ceil((high - low) / (s.min() / 4.0))) + 1
    if count > config.SHARED_NODES:
        return None
    inside = grid[(grid > low) & (grid < high)]
    return np.union1d(inside, np.linspace(low, high, count))


def _moments_chunk(y, noise, prior: PriorModel):
    s = np.sqrt(noise)
    with np.errstate(divide="ignore"):
        atoms_log = np.log(prior.atom_masses)
    atom_terms = atoms_log[None, :] - (y[:, None] - prior.atoms[None, :]) ** 2 / (2.0 * noise[:, None])
    shift = np.max(atom_terms, axis=1, initial=-np.inf)

    continuous = len(prior.grid) >= 2
    if continuous:
        nodes = _shared_nodes(y, s, prior.grid)
        if nodes is None:
            local = y[:, None] + s[:, None] * np.linspace(-10.0, 10.0, 401)[None, :]
            local = np.clip(local, prior.grid[0], prior.grid[-1])
            nodes = np.sort(np.concatenate([np.broadcast_to(prior.grid, (len(y), len(prior.grid))), local], axis=1), axis=1)
            density = np.interp(nodes.ravel(), prior.grid, prior.density).reshape(nodes.shape)
        else:
            density = np.interp(nodes, prior.grid, prior.density)
            nodes, density = nodes[None, :], density[None, :]
        with np.errstate(divide="ignore"):
            cont_terms = np.log(density) - (y[:, None] - nodes) ** 2 / (2.0 * noise[:, None])
        shift = np.maximum(shift, cont_terms.max(axis=1))

    shift = np.where(np.isfinite(shift), shift, 0.0)
    atom_w = np.exp(atom_terms - shift[:, None])
    z = atom_w.sum(axis=1)
    m1 = atom_w @ prior.atoms
    m2 = atom_w @ prior.atoms ** 2

    if continuous:
        cont_w = np.exp(cont_terms - shift[:, None])
        x = nodes[0] if nodes.shape[0] == 1 else nodes
        z = z + trapezoid(cont_w, x, axis=1)
        m1 = m1 + trapezoid(cont_w * nodes, x, axis=1)
        m2 = m2 + trapezoid(cont_w * nodes ** 2, x, axis=1)

    valid = np.isfinite(z) & (z > 0.0)
    safe = np.where(valid, z, 1.0)
    mean = np.where(valid, m1 / safe, prior.mean)
    var = np.where(valid, np.maximum(m2 / safe - mean ** 2, 0.0), prior.variance)
    return mean, var


def conditional_mean_var(y, noise_var, prior: PriorModel, chunk: int = 256):
    """
    Posterior mean and variance of X given Y = X + N(0, noise_var), with X
    drawn from `prior`.  Both arguments broadcast; scalars in, scalars out.
    """
    y_arr, noise_arr = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(noise_var, dtype=float))
    if not np.all(np.isfinite(y_arr)):
        raise ParameterError("observation must be finite")
    if not np.all(noise_arr > 0.0):
        raise ParameterError("noise variance must be positive")

    flat_y, flat_noise = y_arr.ravel(), noise_arr.ravel()
    mean = np.empty_like(flat_y)
    var = np.empty_like(flat_y)
    # Sorted chunks keep nearby observations together so they share nodes.
    order = np.argsort(flat_y, kind="stable")
    for start in range(0, len(order), chunk):
        part = order[start:start + chunk]
        mean[part], var[part] = _moments_chunk(flat_y[part], flat_noise[part], prior)

    if y_arr.ndim == 0:
        return float(mean[0]), float(var[0])
    return mean.reshape(y_arr.shape), var.reshape(y_arr.shape)


class InterpTables:
    """
    Posterior mean and variance tabulated at fixed noise on a uniform grid,
    evaluated by linear interpolation.  Outside the grid the mean is
    extrapolated linearly and the variance holds its endpoint value.
    """

    def __init__(self, points: np.ndarray, means: np.ndarray, variances: np.ndarray, noise: float):
        self.points = points
        self.means = means
        self.variances = variances
        self.noise = noise
        self._mean = interp1d(points, means, kind="linear", fill_value="extrapolate", assume_sorted=True)
        self._var = interp1d(points, variances, kind="linear", bounds_error=False,
                             fill_value=(variances[0], variances[-1]), assume_sorted=True)

    def __call__(self, y):
        return self._mean(y), np.maximum(self._var(y), 0.0)


def build_interp_tables(prior: PriorModel, tau_prev: float, degree: float = 1.0,
                        spec: GridSpec = None, session=None) -> InterpTables:
    """
    Tables of the denoiser for the noise τ/degree, spanning the bulk of the
    prior widened by `table_width` noise deviations on either side.  Tables
    are memoized per prior and noise level.
    """
    session = ensure_session(session)
    spec = spec or GridSpec()
    if not tau_prev > 0.0 or not degree > 0.0:
        raise ParameterError("table noise must be positive", tau=tau_prev, degree=degree)

    tables = _tables(prior, tau_prev / degree, spec)
    with session.setup_log() as report:
        report(S.BuildTables, success=True, noise=tables.noise, span=tables.points[-1])

    return tables


@functools.lru_cache(maxsize=config.TABLE_CACHE)
def _tables(prior: PriorModel, noise: float, spec: GridSpec) -> InterpTables:
    half = spec.table_width * math.sqrt(noise) + prior.scale
    points = np.linspace(-half, half, spec.table_points)
    means, variances = conditional_mean_var(points, noise, prior)
    return InterpTables(points, means, variances, noise)
