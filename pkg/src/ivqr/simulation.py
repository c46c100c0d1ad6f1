"""Synthetic designs and the Monte Carlo driver for rejection frequencies.

All designs share the instrument construction Z = Phi(zeta*omega +
sqrt(1-zeta^2)*eps), W = Phi(omega) with standard normal omega, eps.  The
endogeneity loading theta defaults to 0.7 for the validity and exogeneity
designs and 0.8 for the monotonicity designs.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import norm

from ivqr.estimation import OptimizerSettings, SieveConfig
from ivqr.moments import Sample
from ivqr.numerics import make_random_grid, make_uniform_grid

if TYPE_CHECKING:
    from ivqr.bootstrap import BootstrapConfig

SERIES_TRUNCATION = 100

VALIDITY_DESIGNS = ("null_41", "alt_rho1", "alt_rho2", "alt_rho3", "alt_rho4")
MONOTONICITY_DESIGNS = (
    "nonmono_null",
    "nonmono_alt1_1",
    "nonmono_alt1_2",
    "nonmono_alt2_1",
    "nonmono_alt2_2",
)
EXOG_DESIGNS = ("exog_42",)
ALL_DESIGNS = VALIDITY_DESIGNS + MONOTONICITY_DESIGNS + EXOG_DESIGNS


def phi_series(z) -> np.ndarray:
    """Smooth structural curve sum_{j<=100} j^-4 cos(j*pi*z)."""
    z = np.asarray(z, dtype=float)
    j = np.arange(1, SERIES_TRUNCATION + 1)
    return np.cos(np.multiply.outer(z, j * np.pi)) @ (j ** -4.0)


def phie_series(z) -> np.ndarray:
    """Conditional-quantile curve sum_{j<=100} (-1)^(j+1) j^-2 sin(j*pi*z)."""
    z = np.asarray(z, dtype=float)
    j = np.arange(1, SERIES_TRUNCATION + 1)
    coef = ((-1.0) ** (j + 1)) * j ** -2.0
    return np.sin(np.multiply.outer(z, j * np.pi)) @ coef


def rho_shift(j: int, z) -> np.ndarray:
    """Deviation curves: a jump at 0.25 (j=1,2) or a narrow window (j=3,4)."""
    z = np.asarray(z, dtype=float)
    if j in (1, 2):
        return 10.0 * j * np.where(z <= 0.25, z, z - 1.0)
    if j in (3, 4):
        c = 0.1 if j == 3 else 0.05
        inside = (z >= 0.5 - c) & (z < 0.5 + c)
        return np.where(inside, z / (2.0 * c), 0.0)
    raise ValueError("deviation index must be in 1..4")


def _default_theta(design: str) -> float:
    return 0.8 if design in MONOTONICITY_DESIGNS else 0.7


@dataclass(frozen=True)
class DgpSpec:
    """One synthetic design: name, instrument strength, endogeneity, size, seed."""

    design: str
    n: int
    zeta: float = 0.7
    theta: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.design not in ALL_DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; choose from {ALL_DESIGNS}")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")
        theta = self.theta if self.theta is not None else _default_theta(self.design)
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        object.__setattr__(self, "theta", float(theta))
        if self.n < 1:
            raise ValueError("sample size must be >= 1")


def gen_sample(spec: DgpSpec) -> Sample:
    """Draw (y, z, w) from the requested design, deterministic given the seed."""
    rng = np.random.default_rng(np.random.SeedSequence((0xD6F, spec.seed)))
    n, zeta, theta = spec.n, spec.zeta, spec.theta
    omega = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    eps2 = rng.standard_normal(n)
    z = norm.cdf(zeta * omega + np.sqrt(1.0 - zeta**2) * eps)
    w = norm.cdf(omega)
    design = spec.design

    if design in VALIDITY_DESIGNS:
        v = theta * eps + np.sqrt(1.0 - theta**2) * eps2
        curve = phi_series(z)
        if design != "null_41":
            curve = curve + rho_shift(int(design[-1]), z)
        y = curve * (1.0 + v / 6.0) + v / 2.0
    elif design in MONOTONICITY_DESIGNS:
        v = norm.cdf((theta * eps + np.sqrt(1.0 - theta**2) * eps2) / 4.0)
        base = norm.cdf(z + v)
        if design == "nonmono_null":
            y = base * v**2
        else:
            j = int(design[-1])
            if design.startswith("nonmono_alt1"):
                y = base * (v - 0.5) ** (2 * j)
            else:
                y = base * norm.ppf(v) ** (2 * j)
    else:  # exog_42
        v = theta * eps + np.sqrt(1.0 - theta**2) * eps2
        y = phie_series(z) + v / 2.0
    return Sample(y=y, z=z, w=w)


def true_structural(spec: DgpSpec, z, q: float) -> np.ndarray:
    """Structural quantile curve of the validity designs (V standard normal)."""
    if spec.design not in VALIDITY_DESIGNS:
        raise ValueError("true structural curve is defined for the validity designs only")
    z = np.asarray(z, dtype=float)
    curve = phi_series(z)
    if spec.design != "null_41":
        curve = curve + rho_shift(int(spec.design[-1]), z)
    vq = norm.ppf(q)
    return curve * (1.0 + vq / 6.0) + vq / 2.0


@dataclass(frozen=True)
class TestConfig:
    """Which test the Monte Carlo driver runs, and with what dimensions.

    kind: "spec" (integrated), "spec_q" (single quantile), "exog" or "add".
    random_q draws a fresh uniform quantile grid per replication instead of
    the deterministic grid, mirroring how the integral can be approximated
    by a uniform sample.
    """

    __test__ = False  # keep pytest collection away despite the name

    kind: str = "spec"
    k_n: int = 4
    m_n: int = 20
    l_n: int | None = None
    grid_n: int = 20
    q: float = 0.5
    random_q: bool = False
    bootstrap: "BootstrapConfig | None" = None
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    additive_groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("spec", "spec_q", "exog", "add"):
            raise ValueError("kind must be one of spec, spec_q, exog, add")
        object.__setattr__(
            self, "l_n", 2 * self.k_n if self.l_n is None else int(self.l_n)
        )

    def sieve_config(self, replicate: int = 0) -> SieveConfig:
        if self.random_q:
            grid = make_random_grid(self.grid_n, seed=replicate)
        else:
            grid = make_uniform_grid(self.grid_n)
        return SieveConfig(
            k_n=self.k_n,
            m_n=self.m_n,
            l_n=self.l_n,
            grid=grid,
            optimizer=self.optimizer,
            additive_groups=self.additive_groups,
        )


@dataclass(frozen=True)
class MonteCarloReport:
    """Rejection frequency of one test over replications of one design."""

    spec: DgpSpec
    test: TestConfig
    replications: int
    rejections: int
    alpha: float
    wall_time: float

    @property
    def frequency(self) -> float:
        return self.rejections / self.replications

    @property
    def std_error(self) -> float:
        p = self.frequency
        return float(np.sqrt(p * (1.0 - p) / self.replications))


def replicate_seed(base_seed: int, replicate: int) -> int:
    """Well-mixed per-replication seed, independent of execution order."""
    ss = np.random.SeedSequence((int(base_seed), int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0])


def run_test(sample, tc: TestConfig, alpha: float = 0.05, replicate: int = 0):
    """Execute the configured test on one sample and return its TestResult."""
    from ivqr import testing
    from ivqr.bootstrap import bootstrap_test

    config = tc.sieve_config(replicate)
    if tc.kind == "spec":
        if tc.bootstrap is not None:
            return bootstrap_test(sample, config, tc.bootstrap, alpha)
        return testing.spec_test(sample, config, alpha)
    if tc.kind == "spec_q":
        return testing.spec_test_at(sample, tc.q, config, alpha)
    if tc.kind == "exog":
        return testing.exog_test(sample, tc.q, tc.k_n, tc.m_n, alpha)
    return testing.addit_test(sample, tc.q, config, alpha)


def _mc_replicate(args) -> bool:
    spec, tc, alpha, rep = args
    rep_spec = replace(spec, seed=replicate_seed(spec.seed, rep))
    sample = gen_sample(rep_spec)
    return bool(run_test(sample, tc, alpha, replicate=rep).reject)


def worker_count(requested: int | None = None) -> int:
    """Worker cap from the IVQR_THREADS environment variable."""
    cap = os.environ.get("IVQR_THREADS")
    if requested is None:
        requested = int(cap) if cap else (os.cpu_count() or 1)
    elif cap:
        requested = min(requested, int(cap))
    return max(1, requested)


def run_monte_carlo(
    spec: DgpSpec,
    test: TestConfig,
    replications: int,
    alpha: float = 0.05,
    workers: int | None = None,
) -> MonteCarloReport:
    """Rejection frequency over independent replications (process parallel).

    Replication seeds are derived from (spec.seed, index), so results do not
    depend on scheduling or worker count.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    start = time.perf_counter()
    tasks = [(spec, test, alpha, rep) for rep in range(replications)]
    n_workers = worker_count(workers)
    if n_workers <= 1 or replications == 1:
        outcomes = [_mc_replicate(t) for t in tasks]
    else:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(_mc_replicate, tasks, chunksize=4))
    return MonteCarloReport(
        spec=spec,
        test=test,
        replications=replications,
        rejections=int(sum(outcomes)),
        alpha=alpha,
        wall_time=time.perf_counter() - start,
    )
