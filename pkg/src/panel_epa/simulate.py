"""Monte Carlo designs and the size/power replication harness.

Two data generating processes are provided:

* ``dgp1``: forecast errors of two forecasters follow a spatial AR(1) on a
  rook grid; the loss is quadratic.
* ``dgp2``: loss differentials are generated directly from a two-factor model
  with spatially correlated idiosyncratic errors.

Random numbers come from numpy's counter-based ``Philox`` bit generator.
Replication ``r`` of a run seeded with ``seed`` always uses the stream keyed by
``SeedSequence([seed, r])``, so results do not depend on scheduling.
"""
import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np

from .epa import joint_test, overall_test, standardized_joint
from .errors import EPAError, InputError
from .factors import pc_fit
from .kernels import KernelSpec, default_space_bandwidth
from .panel import DistanceMatrix, ErrorPanel, LossPanel, demean_by_unit, loss_differential

GENERATOR = "numpy.random.Philox (4x64, 10 rounds)"

ALTERNATIVES = ("null", "homogeneous", "heterogeneous")

# Test menus used by the tables. Suffix "_ms" uses line distances, "_ps" the
# partial-sample estimator.
NONROBUST_MENU = ("S1", "J1")
ROBUST_MENU = (
    "S2", "S2_ms", "S2_ps", "S3", "S4", "S4_ms", "S4_ps",
    "J2", "J2_ms", "Z2", "J3", "J4", "J4_ms", "Z4",
)
ALL_TESTS = ("S1", "J1", "Z1") + ROBUST_MENU

TABLES = {
    "nonrobust": dict(menu=NONROBUST_MENU, runs=(("dgp1", "null"), ("dgp2", "null"),
                                                  ("dgp1", "homogeneous"), ("dgp2", "homogeneous"))),
    "sizedgp1": dict(menu=ROBUST_MENU, runs=(("dgp1", "null"),)),
    "sizedgp2": dict(menu=ROBUST_MENU, runs=(("dgp2", "null"),)),
    "powerdgp1": dict(menu=ROBUST_MENU, runs=(("dgp1", "homogeneous"),)),
    "powerdgp2": dict(menu=ROBUST_MENU, runs=(("dgp2", "homogeneous"),)),
}

DEFAULT_GRID = (10, 20, 30, 50, 100)


@dataclass(frozen=True)
class DgpConfig:
    dgp: str = "dgp1"
    n: int = 10
    T: int = 10
    rho: float = 0.5
    alternative: str = "null"
    seed: int = 0
    phi: float = 1 / 3.4
    n_factors: int = 2
    loading_var: float = 0.2
    loading_scale: str = "variance"  # or "std": read 0.2 as a standard deviation
    row_normalize: bool = True
    loadings_zero: bool = False
    grid_cols: Optional[int] = None

    def __post_init__(self):
        if self.dgp not in ("dgp1", "dgp2"):
            raise InputError(f"unknown dgp {self.dgp!r}")
        if self.alternative not in ALTERNATIVES:
            raise InputError(f"unknown alternative {self.alternative!r}")
        if not abs(self.rho) < 1:
            raise InputError("rho must satisfy |rho| < 1")
        if self.n < 1 or self.T < 1:
            raise InputError("n and T must be positive")
        if self.loading_scale not in ("variance", "std"):
            raise InputError("loading_scale is 'variance' or 'std'")

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SpatialLayout:
    coords: np.ndarray
    W: np.ndarray
    S: np.ndarray
    sbar2: float
    rho: float

    @property
    def n(self):
        return self.coords.shape[0]

    def distances(self) -> DistanceMatrix:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return DistanceMatrix(np.sqrt(np.sum(diff ** 2, axis=-1)))


def grid_coords(n, cols=None):
    side = math.isqrt(n - 1) + 1 if cols is None else int(cols)
    if side < 1:
        raise InputError("grid needs at least one column")
    idx = np.arange(n)
    return np.column_stack([idx // side, idx % side]).astype(np.float64)


def build_rook_layout(n: int, rho: float = 0.0, row_normalize: bool = True,
                      cols=None) -> SpatialLayout:
    """Units on a grid filled row by row, ``ceil(sqrt(n))`` columns wide unless
    ``cols`` is given; rook neighbours are units at Euclidean distance <= 1."""
    if n < 1:
        raise InputError("n must be positive")
    coords = grid_coords(n, cols)
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt(np.sum(diff ** 2, axis=-1))
    W = ((d <= 1.0) & (d > 0.0)).astype(np.float64)
    if row_normalize:
        rs = W.sum(axis=1)
        W = np.divide(W, rs[:, None], out=np.zeros_like(W), where=rs[:, None] > 0)
    A = np.eye(n) - rho * W
    try:
        S = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise InputError("I - rho W is singular") from exc
    if not np.all(np.isfinite(S)):
        raise InputError("I - rho W is singular")
    sbar2 = float(np.trace(S @ S.T)) / n
    for a in (coords, W, S):
        a.setflags(write=False)
    return SpatialLayout(coords, W, S, sbar2, float(rho))


@lru_cache(maxsize=64)
def _layout(n, rho, row_normalize, cols):
    return build_rook_layout(n, rho, row_normalize, cols)


def layout_for(cfg: DgpConfig) -> SpatialLayout:
    return _layout(cfg.n, float(cfg.rho), cfg.row_normalize, cfg.grid_cols)


def misspecified_line_distances(n: int) -> DistanceMatrix:
    idx = np.arange(n, dtype=np.float64)
    return DistanceMatrix(np.abs(idx[:, None] - idx[None, :]))


def replication_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(r)])))


def _spatial_noise(layout, T, rng):
    u = rng.standard_normal((layout.n, T))
    return layout.S @ u / math.sqrt(layout.sbar2)


def gen_dgp1(cfg: DgpConfig, layout: SpatialLayout, rng: np.random.Generator):
    """Return ``(ErrorPanel, LossPanel)``; under an alternative the second
    forecaster's errors are inflated by ``sqrt(1.2)`` or ``sqrt(theta_i)``."""
    e1 = _spatial_noise(layout, cfg.T, rng)
    e2 = _spatial_noise(layout, cfg.T, rng)
    if cfg.alternative == "homogeneous":
        e2 = math.sqrt(1.2) * e2
    elif cfg.alternative == "heterogeneous":
        theta = rng.uniform(0.6, 1.4, size=cfg.n)
        e2 = np.sqrt(theta)[:, None] * e2
    errors = ErrorPanel(e1, e2)
    return errors, loss_differential(errors, "quadratic")


def gen_dgp2(cfg: DgpConfig, layout: SpatialLayout, rng: np.random.Generator) -> LossPanel:
    n, T, m = cfg.n, cfg.T, cfg.n_factors
    sd = math.sqrt(cfg.loading_var) if cfg.loading_scale == "variance" else cfg.loading_var
    lam = rng.normal(1.0, sd, size=(n, m))
    f = rng.standard_normal((T, m))
    if cfg.loadings_zero:
        lam = np.zeros_like(lam)
    eps = _spatial_noise(layout, T, rng)
    if cfg.alternative == "null":
        mu = np.zeros(n)
    elif cfg.alternative == "homogeneous":
        mu = np.full(n, 1.2)
    else:
        mu = rng.uniform(-0.4, 0.4, size=n)
    dl = cfg.phi * (mu[:, None] + lam @ f.T + eps)
    return LossPanel(dl, "custom")


def generate(cfg: DgpConfig, r: int) -> LossPanel:
    """Loss panel of replication ``r``."""
    rng = replication_rng(cfg.seed, r)
    layout = layout_for(cfg)
    if cfg.dgp == "dgp1":
        return gen_dgp1(cfg, layout, rng)[1]
    return gen_dgp2(cfg, layout, rng)


# ---------------------------------------------------------------- evaluation

def _needs_fit(tests):
    return any(t.startswith(("S4", "J4", "Z4")) for t in tests)


def evaluate_menu(panel: LossPanel, tests: Sequence[str], spec: KernelSpec,
                  dist: DistanceMatrix, line: DistanceMatrix, m: int = 2) -> Dict[str, tuple]:
    """Evaluate each named test on one panel.

    Returns ``{name: (statistic, p_value)}``; failed tests map to
    ``(nan, nan)``.
    """
    out = {}
    fit = None
    if _needs_fit(tests):
        try:
            fit = pc_fit(demean_by_unit(panel), min(m, panel.n, panel.T))
        except EPAError:
            fit = None
    joint_cache = {}

    def joint(name, **kw):
        if name not in joint_cache:
            try:
                joint_cache[name] = joint_test(panel, spec, name.split("_")[0], **kw)
            except (EPAError, ArithmeticError):
                joint_cache[name] = None
        return joint_cache[name]

    for t in tests:
        try:
            if t == "S1":
                rep = overall_test(panel, spec, "S1")
            elif t == "S2":
                rep = overall_test(panel, spec, "S2", dist=dist)
            elif t == "S2_ms":
                rep = overall_test(panel, spec, "S2", dist=line)
            elif t == "S2_ps":
                rep = overall_test(panel, spec, "S2_partial")
            elif t == "S3":
                rep = overall_test(panel, spec, "S3")
            elif t in ("S4", "S4_ms", "S4_ps"):
                if fit is None:
                    raise InputError("factor fit failed")
                if t == "S4_ps":
                    rep = overall_test(panel, spec, "S4", fit=fit, idio="partial_sample")
                else:
                    rep = overall_test(panel, spec, "S4", fit=fit, idio="shac",
                                       dist=dist if t == "S4" else line)
            elif t in ("J1", "Z1"):
                rep = joint("J1")
            elif t in ("J2", "Z2"):
                rep = joint("J2", dist=dist)
            elif t == "J2_ms":
                rep = joint("J2_ms", dist=line)
            elif t == "J3":
                rep = joint("J3")
            elif t in ("J4", "Z4", "J4_ms"):
                if fit is None:
                    raise InputError("factor fit failed")
                if t == "J4_ms":
                    rep = joint("J4_ms", fit=fit, dist=line)
                else:
                    rep = joint("J4", fit=fit, dist=dist)
            else:
                raise InputError(f"unknown test {t!r}")
            if rep is None:
                raise InputError("joint statistic failed")
            if t.startswith("Z"):
                rep = standardized_joint(rep)
            out[t] = (rep.statistic, rep.p_value)
        except (EPAError, ArithmeticError):
            out[t] = (math.nan, math.nan)
    return out


def _feasible(test, n, T):
    return not (test == "J3" and n >= T)


def default_spec(n):
    return KernelSpec("bartlett", 0, "bartlett", default_space_bandwidth(n))


def _run_chunk(args):
    cfg, tests, rs, space_kernel = args
    spec = KernelSpec("bartlett", 0, space_kernel, default_space_bandwidth(cfg.n))
    layout = layout_for(cfg)
    dist = layout.distances()
    line = misspecified_line_distances(cfg.n)
    stats = np.full((len(rs), len(tests)), np.nan)
    pvals = np.full((len(rs), len(tests)), np.nan)
    for k, r in enumerate(rs):
        panel = generate(cfg, r)
        res = evaluate_menu(panel, tests, spec, dist, line, cfg.n_factors)
        for j, t in enumerate(tests):
            stats[k, j], pvals[k, j] = res[t]
    return stats, pvals


def simulate_statistics(cfg: DgpConfig, tests: Sequence[str], reps: int,
                        workers: int = 1, space_kernel: str = "bartlett"):
    """Statistics and p-values for every replication: two ``reps x len(tests)``
    arrays, NaN where a test failed or is infeasible."""
    tests = tuple(tests)
    live = tuple(t for t in tests if _feasible(t, cfg.n, cfg.T))
    chunks = [tuple(c) for c in np.array_split(np.arange(reps), max(1, workers * 4)) if len(c)]
    jobs = [(cfg, live, c, space_kernel) for c in chunks]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    stats = np.full((reps, len(tests)), np.nan)
    pvals = np.full((reps, len(tests)), np.nan)
    if live:
        s = np.vstack([p[0] for p in parts])
        p = np.vstack([p[1] for p in parts])
        cols = [tests.index(t) for t in live]
        stats[:, cols] = s
        pvals[:, cols] = p
    return stats, pvals


@dataclass
class ExperimentRow:
    test: str
    n: int
    T: int
    dgp: str
    rho: float
    alternative: str
    reps: int
    rejection_rate: float
    failures: int
    note: str = ""


CSV_COLUMNS = ("test", "n", "T", "dgp", "rho", "alternative", "reps",
               "rejection_rate", "failures")


def run_experiment(cfg: DgpConfig, tests: Sequence[str], reps: int, nominal: float = 0.05,
                   workers: int = 1) -> List[ExperimentRow]:
    """Rejection rate (in percent) of each test over ``reps`` replications.

    Replications where a statistic could not be computed are excluded from the
    denominator and counted in ``failures``.
    """
    if reps < 1:
        raise InputError("reps must be positive")
    _, pvals = simulate_statistics(cfg, tests, reps, workers)
    rows = []
    for j, t in enumerate(tests):
        if not _feasible(t, cfg.n, cfg.T):
            rows.append(ExperimentRow(t, cfg.n, cfg.T, cfg.dgp, cfg.rho, cfg.alternative,
                                      reps, math.nan, 0, "infeasible: n >= T"))
            continue
        p = pvals[:, j]
        ok = ~np.isnan(p)
        fails = int(reps - ok.sum())
        rate = 100.0 * float(np.mean(p[ok] < nominal)) if ok.any() else math.nan
        rows.append(ExperimentRow(t, cfg.n, cfg.T, cfg.dgp, cfg.rho, cfg.alternative,
                                  reps, rate, fails))
    return rows


def _upper_tail(test):
    # J is chi-square and Z its upper-tail standardisation
    return test.startswith(("J", "Z"))


def size_adjusted_powers(cfg_null: DgpConfig, cfg_alt: DgpConfig, tests: Sequence[str],
                         reps: int, nominal: float = 0.05, workers: int = 1) -> Dict[str, float]:
    """Size-adjusted power (percent) of several tests from shared draws.

    The critical value of each test is the empirical ``1 - nominal`` quantile
    of its null statistics. Two-sided normal tests use ``|statistic|``; joint
    tests and their standardised versions use the upper tail.
    """
    if reps < 100:
        raise InputError("size-adjusted power needs reps >= 100")
    tests = tuple(tests)
    null, _ = simulate_statistics(cfg_null, tests, reps, workers)
    alt, _ = simulate_statistics(cfg_alt, tests, reps, workers)
    out = {}
    for j, test in enumerate(tests):
        s0, s1 = null[:, j], alt[:, j]
        s0, s1 = s0[~np.isnan(s0)], s1[~np.isnan(s1)]
        if s0.size < 100 or s1.size == 0:
            raise InputError(f"too many failed replications for {test}")
        if not _upper_tail(test):
            s0, s1 = np.abs(s0), np.abs(s1)
        crit = float(np.quantile(s0, 1.0 - nominal))
        out[test] = 100.0 * float(np.mean(s1 > crit))
    return out


def size_adjusted_power(cfg_null: DgpConfig, cfg_alt: DgpConfig, test: str, reps: int,
                        nominal: float = 0.05, workers: int = 1) -> float:
    """Single-test form of :func:`size_adjusted_powers`."""
    return size_adjusted_powers(cfg_null, cfg_alt, (test,), reps, nominal, workers)[test]


def run_table(table: str, reps: int = 2000, n_grid=DEFAULT_GRID, T_grid=DEFAULT_GRID,
              rho: float = 0.5, seed: int = 0, nominal: float = 0.05,
              workers: int = 1, progress=None) -> List[ExperimentRow]:
    try:
        layout_spec = TABLES[table]
    except KeyError:
        raise InputError(f"unknown table {table!r}; choose from {sorted(TABLES)}") from None
    rows = []
    for dgp, alt in layout_spec["runs"]:
        for n in n_grid:
            for T in T_grid:
                cfg = DgpConfig(dgp=dgp, n=n, T=T, rho=rho, alternative=alt, seed=seed)
                rows.extend(run_experiment(cfg, layout_spec["menu"], reps, nominal, workers))
                if progress:
                    progress(dgp, alt, n, T)
    return rows


def write_rows_csv(rows: Sequence[ExperimentRow], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            rate = "" if math.isnan(r.rejection_rate) else f"{r.rejection_rate:.2f}"
            w.writerow([r.test, r.n, r.T, r.dgp, r.rho, r.alternative, r.reps, rate, r.failures])


def manifest(config: dict, version: str) -> dict:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return {
        "seed": config.get("seed"),
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "library_version": version,
        "generator": GENERATOR,
        "config": config,
    }
