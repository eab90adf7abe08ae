"""Driving vector fields and their conservative / rotational structure.

The accelerated flow studied by this package is driven by a vector field
``G`` that splits as ``G = grad J + rot K`` into a conservative part (the
gradient of a potential ``J``) and a divergence-free rotation part.  For a
linear field ``G(x) = Q x`` the split is simply the symmetric / skew
decomposition of ``Q``, and the regularity constants used throughout the
analysis are read off the spectra:

* ``kappa_j`` -- strong-monotonicity (curvature) constant, smallest
  eigenvalue of the symmetric part,
* ``ell_j``   -- Lipschitz constant of the conservative part, largest
  eigenvalue of the symmetric part,
* ``ell_k``   -- Lipschitz constant of the rotation part, spectral norm of
  the skew part,
* ``alpha``   -- the skew-to-curvature ratio ``ell_k / sqrt(ell_j)``.

Nonlinear fields are supplied by the caller as a pair of callables together
with declared constants; :func:`validate_assumption1` checks the declared
constants against sampled finite differences.

The potential convention for linear fields is ``J(x) = 0.5 * x @ Qs @ x``,
so ``grad J(x) = Qs @ x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NotPositiveDefiniteError",
    "LinearField",
    "GeneralField",
    "ValidationReport",
    "helmholtz_split",
    "normalize",
    "validate_assumption1",
]

# Eigenvalues within this relative size of zero do not count as positive.
POSITIVITY_RTOL = 1e-9


class NotPositiveDefiniteError(ValueError):
    """The symmetric part of the driving matrix is not positive definite."""


def _as_square(Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ValueError("matrix entries must be finite")
    return Q


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LinearField:
    """Linear driving field ``G(x) = Q x`` with its symmetric/skew split.

    Instances are produced by :func:`helmholtz_split` and are immutable.
    ``warnings`` carries non-fatal diagnostics (currently only an
    ``alpha out of range`` note when ``alpha > 1``).
    """

    Q: np.ndarray
    Qs: np.ndarray
    Qa: np.ndarray
    ell_j: float
    ell_k: float
    kappa_j: float
    alpha: float
    warnings: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def x_star(self) -> np.ndarray:
        """Unique equilibrium of the field (the origin)."""
        return np.zeros(self.dim)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ x

    def potential(self, x: np.ndarray) -> float:
        """Potential of the conservative part, ``0.5 * x @ Qs @ x``."""
        return 0.5 * float(x @ (self.Qs @ x))

    def potential_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.Qs @ x

    def rotation(self, x: np.ndarray) -> np.ndarray:
        return self.Qa @ x

    def as_general(self) -> "GeneralField":
        """Wrap as a :class:`GeneralField` with the computed constants."""
        return GeneralField(
            dim=self.dim,
            potential=self.potential,
            potential_gradient=self.potential_gradient,
            rotation=self.rotation,
            x_star=self.x_star,
            kappa_j=self.kappa_j,
            ell_j=self.ell_j,
            ell_k=self.ell_k,
        )


@dataclass(frozen=True)
class GeneralField:
    """User-supplied field split with declared regularity constants.

    ``potential_gradient`` and ``rotation`` are the two parts of the split;
    ``potential`` is used by the Lyapunov machinery.  The constants are
    declared, not derived; run :func:`validate_assumption1` to probe them.
    """

    dim: int
    potential: Callable[[np.ndarray], float]
    potential_gradient: Callable[[np.ndarray], np.ndarray]
    rotation: Callable[[np.ndarray], np.ndarray]
    x_star: np.ndarray
    kappa_j: float
    ell_j: float
    ell_k: float
    equilibrium_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "x_star", _freeze(np.atleast_1d(self.x_star)))
        if self.x_star.shape != (self.dim,):
            raise ValueError("x_star must be a vector of length dim")
        if not (self.kappa_j > 0 and self.ell_j > 0 and self.ell_k >= 0):
            raise ValueError("constants must satisfy kappa_j, ell_j > 0 and ell_k >= 0")
        scale = self.equilibrium_tol * (1.0 + float(np.linalg.norm(self.x_star)))
        g = np.linalg.norm(self.potential_gradient(self.x_star))
        r = np.linalg.norm(self.rotation(self.x_star))
        if g > scale or r > scale:
            raise ValueError(
                f"x_star is not an equilibrium: |grad J| = {g:.3e}, |rot K| = {r:.3e}"
            )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.potential_gradient(x) + self.rotation(x)


def helmholtz_split(Q: np.ndarray) -> LinearField:
    """Split a square matrix into its symmetric and skew parts.

    Returns a :class:`LinearField` carrying ``Qs = (Q + Q.T)/2``,
    ``Qa = (Q - Q.T)/2`` and the regularity constants computed from their
    spectra.

    Raises
    ------
    NotPositiveDefiniteError
        If the symmetric part is not positive definite (within the relative
        eigenvalue tolerance ``POSITIVITY_RTOL``).
    """
    Q = _as_square(Q)
    Qs = 0.5 * (Q + Q.T)
    Qa = 0.5 * (Q - Q.T)

    eigs = np.linalg.eigvalsh(Qs)
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo <= POSITIVITY_RTOL * max(abs(lo), abs(hi)):
        raise NotPositiveDefiniteError(
            f"symmetric part has smallest eigenvalue {lo:.6g} <= 0"
        )

    ell_j = hi
    kappa_j = lo
    ell_k = float(np.linalg.norm(Qa, 2))
    alpha = float(ell_k / np.sqrt(ell_j))

    warnings: tuple[str, ...] = ()
    if alpha > 1.0 + 1e-12:
        warnings = (
            f"alpha out of range: ell_k/sqrt(ell_j) = {alpha:.6g} > 1; "
            "the scaling relationship requires alpha in (0, 1]",
        )

    return LinearField(
        Q=_freeze(Q),
        Qs=_freeze(Qs),
        Qa=_freeze(Qa),
        ell_j=ell_j,
        ell_k=ell_k,
        kappa_j=kappa_j,
        alpha=alpha,
        warnings=warnings,
    )


def normalize(f: LinearField) -> tuple[np.ndarray, np.ndarray]:
    """Return the normalized pair ``(Qs / ell_j, alpha * Qa / ell_k)``.

    The first matrix has unit spectral norm; the second has spectral norm
    ``alpha``.  A field with no rotation part maps to a zero second matrix.
    """
    Qhat_s = f.Qs / f.ell_j
    if f.ell_k == 0.0:
        Qhat_a = np.zeros_like(f.Qa)
    else:
        Qhat_a = f.alpha * f.Qa / f.ell_k
    return Qhat_s, Qhat_a


@dataclass(frozen=True)
class ValidationReport:
    """Sampled check of the monotonicity / Lipschitz assumptions."""

    samples: int
    radius: float
    seed: int
    equilibrium_residual: float
    worst_grad_monotonicity: float
    worst_rot_monotonicity: float
    worst_grad_lipschitz: float
    worst_rot_lipschitz: float
    grad_monotone_ok: bool
    rot_monotone_ok: bool
    grad_lipschitz_ok: bool
    rot_lipschitz_ok: bool
    equilibrium_ok: bool

    @property
    def passed(self) -> bool:
        return (
            self.grad_monotone_ok
            and self.rot_monotone_ok
            and self.grad_lipschitz_ok
            and self.rot_lipschitz_ok
            and self.equilibrium_ok
        )

    def failures(self) -> tuple[str, ...]:
        names = (
            ("grad_monotone", self.grad_monotone_ok),
            ("rot_monotone", self.rot_monotone_ok),
            ("grad_lipschitz", self.grad_lipschitz_ok),
            ("rot_lipschitz", self.rot_lipschitz_ok),
            ("equilibrium", self.equilibrium_ok),
        )
        return tuple(name for name, ok in names if not ok)


def _ball_samples(rng: np.random.Generator, center: np.ndarray, radius: float,
                  count: int) -> np.ndarray:
    """Uniform samples in the ball of given radius around ``center``."""
    n = center.shape[0]
    raw = rng.standard_normal((count, n))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return center + raw * radii


def validate_assumption1(f: GeneralField, samples: int = 256,
                         radius: float = 10.0, seed: int = 0,
                         tol: float = 1e-9) -> ValidationReport:
    """Probe the declared constants of a :class:`GeneralField` by sampling.

    Draws ``samples`` point pairs uniformly in the ball of the given radius
    around ``x_star`` and checks the strong-monotonicity and Lipschitz
    inequalities for both parts of the split.  The report carries the worst
    observed ratios; a condition passes when its worst ratio respects the
    declared constant up to a relative slack ``tol``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x1 = _ball_samples(rng, f.x_star, radius, samples)
    x2 = _ball_samples(rng, f.x_star, radius, samples)

    worst_gm = np.inf
    worst_rm = np.inf
    worst_gl = 0.0
    worst_rl = 0.0
    for a, b in zip(x1, x2):
        dx = a - b
        nx2 = float(dx @ dx)
        if nx2 == 0.0:
            continue
        dg = f.potential_gradient(a) - f.potential_gradient(b)
        dr = f.rotation(a) - f.rotation(b)
        worst_gm = min(worst_gm, float(dg @ dx) / nx2)
        worst_rm = min(worst_rm, float(dr @ dx) / nx2)
        nx = np.sqrt(nx2)
        worst_gl = max(worst_gl, float(np.linalg.norm(dg)) / nx)
        worst_rl = max(worst_rl, float(np.linalg.norm(dr)) / nx)

    slack_kappa = tol * max(1.0, f.kappa_j)
    slack_ell_j = tol * max(1.0, f.ell_j)
    slack_ell_k = tol * max(1.0, f.ell_k)
    residual = float(np.linalg.norm(f(f.x_star)))

    return ValidationReport(
        samples=samples,
        radius=radius,
        seed=seed,
        equilibrium_residual=residual,
        worst_grad_monotonicity=float(worst_gm),
        worst_rot_monotonicity=float(worst_rm),
        worst_grad_lipschitz=float(worst_gl),
        worst_rot_lipschitz=float(worst_rl),
        grad_monotone_ok=bool(worst_gm >= f.kappa_j - slack_kappa),
        rot_monotone_ok=bool(worst_rm >= -tol),
        grad_lipschitz_ok=bool(worst_gl <= f.ell_j + slack_ell_j),
        rot_lipschitz_ok=bool(worst_rl <= f.ell_k + slack_ell_k),
        equilibrium_ok=bool(residual <= f.equilibrium_tol * (1.0 + float(np.linalg.norm(f.x_star)))),
    )
