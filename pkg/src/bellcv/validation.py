"""Invariant suite run by ``bellcv validate``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chsh import TSIRELSON, ChshEngine, ChshSettings
from .numerics import HermiteBasisSpec, adaptive_quad, gram_matrix, mode_table
from .propagation import (
    OpticalConfig,
    completeness_residual,
    fresnel_oracle,
    make_propagated_basis,
    sign_projector_overlaps,
)
from .states import BandedModalState, BvParams, DoubleGaussian, poly_gaussian_wavefunction
from .wigner import factor_amplitude, factor_momentum_density, factor_wigner


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: residual={self.residual:.3e} tol={self.tol:.1e}"

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "residual": self.residual, "tol": self.tol}


def check_orthonormality(spec: HermiteBasisSpec, n: int = 128) -> Check:
    small = HermiteBasisSpec(spec.sigma0, min(n, spec.n_max))
    gram = gram_matrix(small)
    return Check("orthonormality", float(np.abs(gram - np.eye(small.size)).max()), 1e-12)


def check_completeness(state: BandedModalState, optics: OpticalConfig, points) -> Check:
    worst = 0.0
    for z, dx in points:
        basis = make_propagated_basis(state.basis, optics, z)
        up = sign_projector_overlaps(basis, dx, "+")
        down = sign_projector_overlaps(basis, dx, "-")
        worst = max(worst, completeness_residual(up, down))
    return Check("projector_completeness", worst, 1e-12)


def check_reconstruction(state: BandedModalState, rng, count: int = 12) -> Check:
    src = state.source
    psi = poly_gaussian_wavefunction(src)
    sp, sm = src.sigma_plus, src.sigma_minus
    xp = rng.normal(0.0, sp, count)
    xm = rng.normal(0.0, 1.5 * sm, count)
    x1 = (xp + xm) / math.sqrt(2.0)
    x2 = (xp - xm) / math.sqrt(2.0)
    exact = psi(x1, x2)
    modal = state.amplitude(x1, x2)
    peak = float(np.abs(psi(np.array([0.0, 2 * sm]), np.array([0.0, -2 * sm]))).max())
    return Check("pointwise_reconstruction", float(np.abs(modal - exact).max() / peak), 1e-8)


def check_probabilities(engine: ChshEngine, points) -> list:
    total = 0.0
    exchange = 0.0
    for z1, z2, dx1, dx2 in points:
        q = engine.quadrant_probabilities(z1, z2, dx1, dx2)
        total = max(total, abs(q.total - 1.0))
    for z1, z2, _, _ in points:
        exchange = max(exchange, abs(engine.correlation(z1, z2) - engine.correlation(z2, z1)))
    return [Check("probability_sum", total, 1e-10), Check("exchange_symmetry", exchange, 1e-10)]


def check_tsirelson(engine: ChshEngine, settings) -> Check:
    worst = max(engine.chsh(s).s_max for s in settings)
    return Check("tsirelson_ceiling", max(0.0, worst - TSIRELSON), 1e-9)


def check_marginals(state) -> list:
    src = state.source if isinstance(state, BandedModalState) else state
    if not isinstance(src, (BvParams, DoubleGaussian)):
        return []
    checks = []
    for part, sigma in (("plus", src.sigma_plus), ("minus", src.sigma_minus)):
        amp = factor_amplitude(src, part)
        mom = factor_momentum_density(src, part)
        kmax = 14.0 / sigma
        worst = 0.0
        for x in sigma * np.array([0.0, 0.7, 2.2, 3.5]):
            val, _ = adaptive_quad(lambda k: float(factor_wigner(src, part, x, k)), -kmax, kmax, 1e-11 / sigma)
            worst = max(worst, abs(val - float(amp(x)) ** 2) * sigma)
        for k in np.array([0.0, 0.4, 1.3, 2.5]) / sigma:
            val, _ = adaptive_quad(lambda x: float(factor_wigner(src, part, x, k)), -14 * sigma, 14 * sigma, 1e-11 * sigma)
            worst = max(worst, abs(val - float(mom(k))) / sigma)
        # densities are compared in units of their natural scale
        checks.append(Check(f"wigner_marginals_{part}", worst, 1e-8))
    return checks


def check_fresnel_modes(spec: HermiteBasisSpec, optics: OpticalConfig, modes=(0, 3, 10)) -> Check:
    """Fresnel-integral propagation of single modes against the Gouy-phase form."""
    sigma0 = spec.sigma0
    k = optics.k
    zr = 2.0 * k * sigma0**2
    z = 0.5 * zr
    top = max(modes)
    width = sigma0 * math.sqrt(2.0) * (math.sqrt(2 * top + 1) + 9.0)
    h = sigma0 / 16.0
    x = h * np.arange(-int(width / h), int(width / h) + 1)
    table = mode_table(HermiteBasisSpec(sigma0, top), x)
    basis = make_propagated_basis(spec, optics, z)
    s = basis.scale
    radius = z * (1.0 + (zr / z) ** 2)
    x_out = x[np.abs(x) <= 0.6 * width]
    stretched = mode_table(HermiteBasisSpec(sigma0, top), x_out / s) / math.sqrt(s)
    worst = 0.0
    for n in modes:
        numeric = fresnel_oracle(x, table[n], optics, z, x_out)
        analytic = stretched[n] * np.exp(1j * k * x_out**2 / (2.0 * radius) - 1j * (n + 0.5) * basis.gouy)
        worst = max(worst, float(np.abs(numeric - analytic).max() / np.abs(table[n]).max()))
    return Check("fresnel_mode_oracle", worst, 1e-8)


def run_suite(state: BandedModalState, optics: OpticalConfig, *, seed: int = 7) -> list:
    rng = np.random.default_rng(seed)
    engine = ChshEngine(state, optics)
    sp = state.source.sigma_plus
    prob_points = [(0.0, 0.0, 0.0, 0.0), (-3.0, 8.0, 0.0, 0.0), (5.0, -2.0, 0.1 * sp, -0.2 * sp)]
    settings = [ChshSettings(-12.0, 4.0, -12.0, 4.0), ChshSettings(8.0, 0.0, 8.0, -3.0)]
    checks = [
        Check("modal_norm", state.norm_residual, 1e-12),
        check_orthonormality(state.basis),
        check_completeness(state, optics, [(0.0, 0.0), (4.0, 0.3 * sp), (-9.0, -0.5 * sp)]),
        check_reconstruction(state, rng),
        *check_probabilities(engine, prob_points),
        check_tsirelson(engine, settings),
        *check_marginals(state),
        check_fresnel_modes(state.basis, optics),
    ]
    return checks
