"""Dipole radiation collected through a high-NA lens.

Angular emission patterns of sigma and pi transitions, their overlap with the
collection aperture, the polarization contrast seen through an analyzer after
the collimating lens, and the multiplicative detection-efficiency budget.

Geometry conventions: the quantization axis Q sets the dipole orientation;
the collection (lens) axis C makes an angle ``beta`` with Q (default
perpendicular).  Directions inside the aperture are parametrized in the
collection frame by (u, phi) with u = cos(angle to C); the aperture covers
u in [cos(asin(NA)), 1].  Solid-angle integrals use a Gauss-Legendre rule in
u times a periodic trapezoid rule in phi, refined until convergence.

The analyzer model is an ideal linear polarizer in the collimated beam: each
ray's far field is decomposed into its spherical components about C, which an
aplanatic lens maps onto the radial/azimuthal pupil directions; the polarizer
then selects the pupil component parallel or perpendicular to the projection
of Q.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericsError

SIGMA_PLUS = "sigma_plus"
SIGMA_MINUS = "sigma_minus"
PI = "pi"
_DIPOLE_KINDS = (SIGMA_PLUS, SIGMA_MINUS, PI)


@dataclass(frozen=True)
class CollectionGeometry:
    """High-NA collection aperture relative to the quantization axis."""

    numerical_aperture: float = 0.7
    collection_axis_angle_to_quantization_axis: float = math.pi / 2
    solid_angle_fraction: float = 0.15

    def __post_init__(self) -> None:
        if not 0.0 < self.numerical_aperture < 1.0:
            raise ValueError("numerical aperture must be in (0, 1)")
        beta = self.collection_axis_angle_to_quantization_axis
        if not 0.0 <= beta <= math.pi:
            raise ValueError("collection axis angle must be in [0, pi]")
        if not 0.0 < self.solid_angle_fraction < 1.0:
            raise ValueError("solid_angle_fraction must be in (0, 1)")
        geo = self.geometric_solid_angle_fraction
        if abs(geo - self.solid_angle_fraction) > 0.10 * geo:
            warnings.warn(
                f"configured solid-angle fraction {self.solid_angle_fraction:g} "
                f"deviates more than 10% from the ideal-lens value {geo:.4f}",
                stacklevel=2)

    @property
    def geometric_solid_angle_fraction(self) -> float:
        """Cap fraction (1 - cos(asin(NA)))/2 of an ideal lens."""
        return 0.5 * (1.0 - math.sqrt(1.0 - self.numerical_aperture**2))


@dataclass(frozen=True)
class EfficiencyBudget:
    """Ordered multiplicative chain of collection/detection factors."""

    factors: tuple[tuple[str, float], ...] = (
        ("lens_transmission", 0.87),
        ("solid_angle_fraction", 0.15),
        ("pattern_correction", 0.85),
        ("imaging_optics", 0.58),
        ("pinhole_and_quantum_efficiency", 0.10),
    )

    def __post_init__(self) -> None:
        if len(self.factors) == 0:
            raise ValueError("budget must contain at least one factor")
        for label, value in self.factors:
            if not 0.0 < value <= 1.0:
                raise ValueError(f"factor {label!r} must be in (0, 1], got {value}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)


def dipole_pattern(polarization: str, theta) -> np.ndarray | float:
    """Normalized angular intensity (sr^-1) of a dipole transition.

    ``theta`` is measured from the quantization axis.  sigma+/- share the
    rotating-dipole pattern (3/16pi)(1 + cos^2), pi has (3/8pi) sin^2; both
    integrate to one over the sphere.
    """
    if polarization not in _DIPOLE_KINDS:
        raise ValueError(f"unknown polarization {polarization!r}")
    th = np.asarray(theta, dtype=float)
    if np.any((th < 0) | (th > math.pi + 1e-12)):
        raise ValueError("theta must lie in [0, pi]")
    c2 = np.cos(th) ** 2
    if polarization == PI:
        out = (3.0 / (8.0 * math.pi)) * (1.0 - c2)
    else:
        out = (3.0 / (16.0 * math.pi)) * (1.0 + c2)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# aperture quadrature
# ---------------------------------------------------------------------------

def _cap_nodes(na: float, n_radial: int):
    """Product-rule nodes over the aperture cap: u = cos(theta_c), phi."""
    c = math.sqrt(1.0 - na * na)
    x, wu = np.polynomial.legendre.leggauss(n_radial)
    u = 0.5 * (x + 1.0) * (1.0 - c) + c
    wu = wu * 0.5 * (1.0 - c)
    n_phi = max(8, 2 * n_radial)
    phi = np.arange(n_phi) * (2.0 * math.pi / n_phi)
    wphi = 2.0 * math.pi / n_phi
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    ww = wu[:, None] * wphi
    return uu, pp, ww


def _cap_integral(integrand, na: float, n_radial: int) -> float:
    u, phi, w = _cap_nodes(na, n_radial)
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    nx = s * np.cos(phi)
    ny = s * np.sin(phi)
    nz = u
    return float(np.sum(integrand(nx, ny, nz) * w))


def _converged_cap_integral(integrand, na: float, tol: float = 1e-6,
                            n0: int = 16, max_doublings: int = 8) -> float:
    prev = None
    n = n0
    for _ in range(max_doublings):
        val = _cap_integral(integrand, na, n)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise NumericsError(f"aperture quadrature did not converge to {tol:g}")


def _quantization_axis(geometry: CollectionGeometry) -> np.ndarray:
    beta = geometry.collection_axis_angle_to_quantization_axis
    return np.array([math.sin(beta), 0.0, math.cos(beta)])


def pattern_correction_factor(geometry: CollectionGeometry, polarization: str,
                              n_radial: int | None = None) -> float:
    """Collected pattern fraction relative to an isotropic emitter.

    Ratio of the dipole pattern integrated over the aperture to the aperture's
    own solid-angle fraction; ``"isotropic"`` is accepted as a quadrature
    self-check and returns exactly 1.  ``n_radial`` pins the quadrature order
    (refinement studies); by default the rule is refined to 1e-6.
    """
    if polarization == "isotropic":
        def integrand(nx, ny, nz):
            return np.full_like(nx, 1.0 / (4.0 * math.pi))
    elif polarization in _DIPOLE_KINDS:
        q = _quantization_axis(geometry)

        def integrand(nx, ny, nz):
            cos_tq = np.clip(nx * q[0] + ny * q[1] + nz * q[2], -1.0, 1.0)
            return dipole_pattern(polarization, np.arccos(cos_tq))
    else:
        raise ValueError(f"unknown polarization {polarization!r}")

    na = geometry.numerical_aperture
    if n_radial is not None:
        collected = _cap_integral(integrand, na, n_radial)
    else:
        collected = _converged_cap_integral(integrand, na)
    return collected / geometry.geometric_solid_angle_fraction


def _polarizer_rates(geometry: CollectionGeometry, kind: str,
                     n_radial: int | None) -> tuple[float, float]:
    """(R_perp, R_parallel) analyzer rates for a unit dipole of given kind."""
    beta = geometry.collection_axis_angle_to_quantization_axis
    if abs(math.sin(beta)) < 1e-9:
        raise ValueError("polarizer axes are undefined with the collection "
                         "axis parallel to the quantization axis")
    q = _quantization_axis(geometry)
    # orthonormal frame attached to Q; the sigma dipole rotates in (e1, e2)
    e1 = np.array([math.cos(beta), 0.0, -math.sin(beta)])
    e2 = np.array([0.0, 1.0, 0.0])
    if kind == PI:
        p = q.astype(complex)
    elif kind in (SIGMA_PLUS, SIGMA_MINUS):
        sgn = 1.0 if kind == SIGMA_PLUS else -1.0
        p = (e1 + sgn * 1j * e2) / math.sqrt(2.0)
    else:
        raise ValueError(f"unknown polarization {kind!r}")

    def make_integrand(component: str):
        def integrand(nx, ny, nz):
            ndotp = nx * p[0] + ny * p[1] + nz * p[2]
            ex = p[0] - ndotp * nx
            ey = p[1] - ndotp * ny
            ez = p[2] - ndotp * nz
            s = np.sqrt(np.clip(1.0 - nz * nz, 1e-300, None))
            cphi = nx / s
            sphi = ny / s
            # spherical components about the collection axis
            e_th = ex * nz * cphi + ey * nz * sphi - ez * s
            e_ph = -ex * sphi + ey * cphi
            # aplanatic lens: theta-hat -> pupil radial, phi-hat -> azimuthal
            if component == "parallel":   # along the pupil projection of Q
                amp = e_th * cphi - e_ph * sphi
            else:                          # perpendicular
                amp = e_th * sphi + e_ph * cphi
            return amp.real**2 + amp.imag**2
        return integrand

    na = geometry.numerical_aperture
    if n_radial is not None:
        r_par = _cap_integral(make_integrand("parallel"), na, n_radial)
        r_perp = _cap_integral(make_integrand("perpendicular"), na, n_radial)
    else:
        r_par = _converged_cap_integral(make_integrand("parallel"), na)
        r_perp = _converged_cap_integral(make_integrand("perpendicular"), na)
    return r_perp, r_par


def polarization_contrast(geometry: CollectionGeometry, pi_fraction: float,
                          n_radial: int | None = None) -> float:
    """Analyzer contrast (R_perp - R_par)/(R_perp + R_par) of the collected light.

    ``pi_fraction`` is the fraction of *collected* photons that are
    pi-polarized (the rest are sigma+); with that convention the contrast is
    the collected-weight average of the pure-sigma and pure-pi contrasts and
    decreases strictly with ``pi_fraction`` for perpendicular viewing.
    """
    if not 0.0 <= pi_fraction <= 1.0:
        raise ValueError("pi_fraction must be in [0, 1]")
    rp_s, rl_s = _polarizer_rates(geometry, SIGMA_PLUS, n_radial)
    c_sigma = (rp_s - rl_s) / (rp_s + rl_s)
    if pi_fraction == 0.0:
        return c_sigma
    rp_p, rl_p = _polarizer_rates(geometry, PI, n_radial)
    c_pi = (rp_p - rl_p) / (rp_p + rl_p)
    return (1.0 - pi_fraction) * c_sigma + pi_fraction * c_pi


def invert_pi_fraction(geometry: CollectionGeometry,
                       measured_contrast: float) -> float:
    """Collected pi fraction that reproduces a measured analyzer contrast.

    Root-find on :func:`polarization_contrast`; the contrast is strictly
    monotone in the pi fraction so the solution is unique.  Contrasts outside
    the [pure-pi, pure-sigma] range are rejected.
    """
    c_sigma = polarization_contrast(geometry, 0.0)
    c_pi = polarization_contrast(geometry, 1.0)
    lo, hi = min(c_sigma, c_pi), max(c_sigma, c_pi)
    if not lo <= measured_contrast <= hi:
        raise ValueError(
            f"contrast {measured_contrast:g} outside achievable range "
            f"[{lo:.4f}, {hi:.4f}]")
    return float(brentq(
        lambda x: polarization_contrast(geometry, x) - measured_contrast,
        0.0, 1.0, xtol=1e-12))


def emitted_fraction_from_collected(geometry: CollectionGeometry,
                                    collected_pi_fraction: float) -> float:
    """Convert a collected pi fraction into the emitted-photon pi fraction.

    The two differ through the pattern correction factors of the pi and sigma
    patterns over the same aperture.
    """
    if not 0.0 <= collected_pi_fraction < 1.0:
        raise ValueError("collected_pi_fraction must be in [0, 1)")
    c_sig = pattern_correction_factor(geometry, SIGMA_PLUS)
    c_pi = pattern_correction_factor(geometry, PI)
    odds = collected_pi_fraction / (1.0 - collected_pi_fraction) * (c_sig / c_pi)
    return odds / (1.0 + odds)


def overall_efficiency(budget: EfficiencyBudget) -> float:
    """Product of all budget factors."""
    out = 1.0
    for _, value in budget.factors:
        out *= value
    return out


def budget_compatible(budget: EfficiencyBudget, measured: float,
                      uncertainty: float, n_sigma: float = 2.0) -> bool:
    """Whether the budget product agrees with a measured efficiency."""
    if uncertainty <= 0:
        raise ValueError("uncertainty must be positive")
    return abs(overall_efficiency(budget) - measured) <= n_sigma * uncertainty


def calibrate_efficiency_from_saturation(count_rates, gamma: float) -> float:
    """Detection efficiency from a cw saturation measurement.

    ``count_rates`` holds (saturation_parameter, detected_rate_per_s) pairs
    following eta * (gamma/2) * s / (1 + s); the saturated emission rate of a
    closed two-level system is gamma/2.  The single free scale eta is fitted
    by least squares.  An infinite saturation parameter denotes the fully
    saturated limit.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    pts = list(count_rates)
    if len(pts) == 0:
        raise ValueError("at least one calibration point is required")
    s = np.array([p[0] for p in pts], dtype=float)
    r = np.array([p[1] for p in pts], dtype=float)
    if np.any(s < 0):
        raise ValueError("saturation parameters must be non-negative")
    if np.any(~np.isfinite(r)):
        raise ValueError("count rates must be finite")
    with np.errstate(invalid="ignore"):
        sat = np.where(np.isinf(s), 1.0, s / (1.0 + s))
    g = 0.5 * gamma * sat
    denom = float(np.dot(g, g))
    if denom == 0.0:
        raise NumericsError("degenerate calibration data (all rates at s=0)")
    eta = float(np.dot(g, r)) / denom
    if not np.isfinite(eta) or eta <= 0:
        raise NumericsError(f"saturation fit produced invalid efficiency {eta!r}")
    return eta
