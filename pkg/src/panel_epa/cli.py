"""Command-line front end.

Usage::

    panel-epa dm       --input errors.csv [--loss quadratic]
    panel-epa overall  --input errors.csv --estimator s3
    panel-epa joint    --input errors.csv --estimator j3 --standardized
    panel-epa cd       --input errors.csv --m auto
    panel-epa workflow --input errors.csv --distances dist.csv --distance-quantile 0.25
    panel-epa simulate --table sizedgp1 --reps 2000 --output size.csv

Input panels are long CSV files with the header ``unit,time,e1,e2``.
Distance files are square CSV matrices whose first row and first column hold
unit labels. Every analysis command writes a CSV report (``--output``) and a
human-readable ``.txt`` next to it; both carry a hash of the resolved
configuration.

Settings may also come from a key-value file given by ``--config``::

    [run]
    loss = absolute
    bandwidth = 0
    space_kernel = bartlett
    distance_quantile = 0.25

Flags on the command line override the file. Exit codes: 0 success,
2 input error, 3 numerical failure, 4 infeasible test.
"""
import argparse
import configparser
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .crossdep import bp_lm, bp_lm_bias_corrected, defactor
from .epa import dm_unit_test, joint_test, overall_test, standardized_joint
from .errors import EPAError, InfeasibleTestError, InputError, NumericalError
from .factors import pc_fit, select_num_factors
from .kernels import KernelSpec, default_time_bandwidth
from .panel import DistanceMatrix, ErrorPanel, demean_by_unit, loss_differential
from . import simulate as sim

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_INFEASIBLE = 0, 2, 3, 4

DEFAULTS = {
    "loss": "quadratic",
    "time_kernel": "bartlett",
    "bandwidth": "0",
    "space_kernel": "bartlett",
    "distance_threshold": None,
    "distance_quantile": None,
    "m": "auto",
    "m_max": "8",
    "idio": None,
    "seed": "0",
}

SIM_DEFAULTS = {
    "table": "sizedgp1",
    "reps": "2000",
    "n_grid": ",".join(map(str, sim.DEFAULT_GRID)),
    "T_grid": ",".join(map(str, sim.DEFAULT_GRID)),
    "rho": "0.5",
    "nominal": "0.05",
    "workers": "1",
    "seed": "20240601",
}

PANEL_COLUMNS = ("unit", "time", "e1", "e2")


# ---------------------------------------------------------------- ingestion

def _time_key(labels):
    try:
        vals = [float(x) for x in labels]
    except ValueError:
        return sorted(labels)
    return [lab for _, lab in sorted(zip(vals, labels))]


def ingest_long_csv(path) -> ErrorPanel:
    """Read a long-format panel of forecast errors.

    Parameters
    ----------
    path : str or Path
        UTF-8 CSV with header ``unit,time,e1,e2`` (extra columns ignored).

    Returns
    -------
    ErrorPanel
        Units in order of first appearance, times sorted ascending
        (numerically when every label parses as a number).

    Raises
    ------
    InputError
        On a missing header column, a non-numeric error value, a duplicate
        ``(unit, time)`` cell or a missing cell.
    """
    cells = {}
    units, times = [], set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in PANEL_COLUMNS if c not in header]
        if missing:
            raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        seen_units = set()
        for row in reader:
            line = reader.line_num
            u, t = row["unit"].strip(), row["time"].strip()
            try:
                vals = (float(row["e1"]), float(row["e2"]))
            except (TypeError, ValueError):
                raise InputError(f"{path}: non-numeric value on line {line}") from None
            if (u, t) in cells:
                raise InputError(f"{path}: duplicate cell ({u},{t}) on line {line}")
            cells[(u, t)] = vals
            if u not in seen_units:
                seen_units.add(u)
                units.append(u)
            times.add(t)
    if not cells:
        raise InputError(f"{path}: no data rows")
    tlabels = _time_key(list(times))
    e = np.empty((2, len(units), len(tlabels)))
    for i, u in enumerate(units):
        for j, t in enumerate(tlabels):
            try:
                e[:, i, j] = cells[(u, t)]
            except KeyError:
                raise InputError(f"unbalanced panel at ({u},{t})") from None
    return ErrorPanel(e[0], e[1], units, tlabels)


def write_long_csv(panel: ErrorPanel, path):
    """Inverse of :func:`ingest_long_csv`; floats use ``repr`` so the round
    trip is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PANEL_COLUMNS)
        for i, u in enumerate(panel.unit_labels):
            for j, t in enumerate(panel.time_labels):
                w.writerow([u, t, repr(float(panel.e1[i, j])), repr(float(panel.e2[i, j]))])


def ingest_distance_csv(path, unit_labels, sym_tol=1e-9) -> DistanceMatrix:
    """Read a labelled square distance matrix and align it to ``unit_labels``.

    Asymmetry up to ``sym_tol`` (relative to the largest distance) is
    averaged away; anything larger is an error, as are negative entries and
    labels that do not match the panel.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise InputError(f"{path}: distance file needs a header row and data rows")
    cols = [c.strip() for c in rows[0][1:]]
    body = {}
    for k, r in enumerate(rows[1:], start=2):
        lab = r[0].strip()
        try:
            body[lab] = [float(x) for x in r[1:]]
        except ValueError:
            raise InputError(f"{path}: non-numeric distance on line {k}") from None
        if len(body[lab]) != len(cols):
            raise InputError(f"{path}: line {k} has {len(body[lab])} entries, expected {len(cols)}")
    labels = [str(u) for u in unit_labels]
    for lab in labels:
        if lab not in body or lab not in cols:
            raise InputError(f"{path}: no distances for unit {lab!r}")
    ci = [cols.index(lab) for lab in labels]
    d = np.array([[body[a][j] for j in ci] for a in labels])
    if not np.all(np.isfinite(d)):
        raise InputError(f"{path}: distances must be finite")
    if np.any(d < 0):
        raise InputError(f"{path}: negative distance")
    scale = max(float(np.max(d)), 1.0)
    if np.max(np.abs(d - d.T)) > sym_tol * scale:
        raise InputError(f"{path}: distance matrix is not symmetric")
    if np.any(np.diag(d) != 0):
        raise InputError(f"{path}: distance of a unit to itself must be 0")
    d = 0.5 * (d + d.T)
    return DistanceMatrix(d, labels)


def bandwidth_from_quantile(dist, q: float) -> float:
    """Nearest-rank ``q``-quantile of the off-diagonal distances ``d_ij``,
    ``i < j``."""
    if not 0 < q <= 1:
        raise InputError("distance quantile must be in (0, 1]")
    d = dist.d if isinstance(dist, DistanceMatrix) else np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    if n < 2:
        raise InputError("quantile bandwidth needs at least two units")
    vals = np.sort(d[np.triu_indices(n, k=1)])
    rank = max(1, math.ceil(q * vals.size))
    return float(vals[rank - 1])


# ---------------------------------------------------------------- config

def load_config(path):
    """Read ``[run]`` (or the default section) of a key-value file."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise InputError(f"malformed config {path}: {exc}") from None
    section = cp["run"] if cp.has_section("run") else cp.defaults()
    return {k.replace("-", "_"): v for k, v in section.items()}


def resolve(args, defaults):
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for k, v in vars(args).items():
        if v is not None and k not in ("func", "config"):
            cfg[k] = v
    return cfg


def config_hash(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _int(cfg, key):
    try:
        return int(cfg[key])
    except (TypeError, ValueError):
        raise InputError(f"{key} must be an integer, got {cfg[key]!r}") from None


def _float(cfg, key):
    try:
        return float(cfg[key])
    except (TypeError, ValueError):
        raise InputError(f"{key} must be a number, got {cfg[key]!r}") from None


def _grid(text, key):
    try:
        vals = tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise InputError(f"{key} must be a comma-separated list of integers") from None
    if not vals or min(vals) < 1:
        raise InputError(f"{key} must list positive integers")
    return vals


# ---------------------------------------------------------------- context

class Context:
    """Resolved inputs shared by the analysis commands."""

    def __init__(self, cfg):
        if not cfg.get("input"):
            raise InputError("--input is required")
        self.cfg = cfg
        cfg["input_sha256"] = _file_digest(cfg["input"])
        self.errors = ingest_long_csv(cfg["input"])
        self.panel = loss_differential(self.errors, cfg["loss"])
        self.dm = demean_by_unit(self.panel)
        self.dist = None
        if cfg.get("distances"):
            cfg["distances_sha256"] = _file_digest(cfg["distances"])
            self.dist = ingest_distance_csv(cfg["distances"], self.panel.unit_labels)
        self.spec = self._kernel()
        self._fit = None

    def _kernel(self):
        cfg = self.cfg
        bw = str(cfg["bandwidth"]).strip().lower()
        bandwidth = default_time_bandwidth(self.panel.T) if bw == "auto" else _int(cfg, "bandwidth")
        threshold = None
        if cfg.get("distance_threshold") is not None:
            threshold = _float(cfg, "distance_threshold")
        elif cfg.get("distance_quantile") is not None:
            if self.dist is None:
                raise InputError("--distance-quantile needs --distances")
            threshold = bandwidth_from_quantile(self.dist, _float(cfg, "distance_quantile"))
        cfg["resolved_bandwidth"] = bandwidth
        cfg["resolved_distance_threshold"] = threshold
        return KernelSpec(cfg["time_kernel"], bandwidth, cfg["space_kernel"], threshold)

    def n_factors(self):
        m = str(self.cfg["m"]).strip().lower()
        if m == "auto":
            m_max = min(_int(self.cfg, "m_max"), self.panel.n, self.panel.T)
            if m_max < 1:
                raise InputError("m_max must be >= 1")
            return select_num_factors(self.dm, m_max)
        k = _int(self.cfg, "m")
        if k < 0:
            raise InputError("m must be nonnegative")
        return k

    def fit(self):
        if self._fit is None:
            self._fit = pc_fit(self.dm, self.n_factors())
        return self._fit

    def idio(self, joint):
        if self.cfg.get("idio"):
            return self.cfg["idio"]
        if joint:
            return "kernel" if self.dist is not None else "diagonal"
        return "shac" if self.dist is not None else "partial_sample"


# ---------------------------------------------------------------- reports

REPORT_COLUMNS = ("test", "statistic", "distribution", "df", "p_value", "two_sided",
                  "variance", "defactored", "m_used", "notes")


def _row(rep):
    row = dict.fromkeys(REPORT_COLUMNS, "")
    row.update(rep.as_row())
    if "variant" in row:
        row["variance"] = row.pop("variant")
    return {k: row[k] for k in REPORT_COLUMNS}


def write_report(reports, cfg, path, title):
    """Write ``path`` (CSV) and ``path.with_suffix('.txt')``; returns both."""
    path = Path(path)
    digest = config_hash(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={digest}\n")
        w = csv.DictWriter(fh, REPORT_COLUMNS)
        w.writeheader()
        for rep in reports:
            w.writerow(_row(rep))
    txt = path.with_suffix(".txt")
    lines = [title, f"panel-epa {__version__}", f"config hash: {digest}", ""]
    for k in sorted(cfg):
        lines.append(f"  {k} = {cfg[k]}")
    lines.append("")
    lines.append(f"{'test':<14}{'statistic':>12}  {'reference':<14}{'p-value':>10}")
    for rep in reports:
        ref = rep.distribution + (f"({rep.df})" if rep.df not in (None, "") else "")
        lines.append(f"{rep.name:<14}{rep.statistic:>12.4f}  {ref:<14}{rep.p_value:>10.4f}")
        notes = getattr(rep, "notes", ())
        for note in notes:
            lines.append(f"{'':<14}note: {note}")
    txt.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path, txt


def _finish(reports, cfg, title):
    out = cfg.get("output") or f"{cfg['command']}_report.csv"
    csv_path, txt_path = write_report(reports, cfg, out, title)
    print(txt_path.read_text(encoding="utf-8"), end="")
    return EXIT_OK


# ---------------------------------------------------------------- commands

def cmd_dm(cfg):
    ctx = Context(cfg)
    reps = [dm_unit_test(ctx.panel, ctx.spec, i) for i in range(ctx.panel.n)]
    return _finish(reps, cfg, "Unit-by-unit DM tests")


def _overall(ctx, est):
    est = est.upper().replace("S2_PS", "S2_partial").replace("S2_PARTIAL", "S2_partial")
    if est == "S4":
        return overall_test(ctx.panel, ctx.spec, "S4", dist=ctx.dist, fit=ctx.fit(),
                            idio=ctx.idio(False))
    return overall_test(ctx.panel, ctx.spec, est, dist=ctx.dist)


def _joint(ctx, est, standardized):
    est = est.upper()
    kw = {"dist": ctx.dist}
    if est == "J4":
        kw.update(fit=ctx.fit(), idio=ctx.idio(True))
    rep = joint_test(ctx.panel, ctx.spec, est, **kw)
    return [rep, standardized_joint(rep)] if standardized else [rep]


def cmd_overall(cfg):
    ctx = Context(cfg)
    ests = [e.strip() for e in str(cfg.get("estimator") or "s3").split(",") if e.strip()]
    return _finish([_overall(ctx, e) for e in ests], cfg, "Overall EPA tests")


def cmd_joint(cfg):
    ctx = Context(cfg)
    ests = [e.strip() for e in str(cfg.get("estimator") or "j3").split(",") if e.strip()]
    reps = []
    for e in ests:
        reps += _joint(ctx, e, bool(cfg.get("standardized")))
    return _finish(reps, cfg, "Joint EPA tests")


def _cd_reports(ctx):
    rows = ctx.dm.dlt
    out = [bp_lm(rows), bp_lm_bias_corrected(rows)]
    m = ctx.n_factors()
    cfg = ctx.cfg
    cfg["selected_m"] = m
    if m > 0:
        res = defactor(ctx.dm, m)
        out += [bp_lm(res, True, m), bp_lm_bias_corrected(res, defactored=True, m_used=m)]
    return out


def cmd_cd(cfg):
    ctx = Context(cfg)
    return _finish(_cd_reports(ctx), cfg, "Cross-sectional dependence tests")


def cmd_workflow(cfg):
    """CD pretests, factor selection, then overall and joint tests."""
    ctx = Context(cfg)
    reps = _cd_reports(ctx)
    reps += [_overall(ctx, "S1"), _overall(ctx, "S3"), _overall(ctx, "S4")]
    reps += _joint(ctx, "J1", False)
    if ctx.panel.n < ctx.panel.T:
        reps += _joint(ctx, "J3", False)
    reps += _joint(ctx, "J4", True)
    return _finish(reps, cfg, "EPA workflow: CD pretests, factor selection, panel tests")


def cmd_simulate(cfg):
    reps = _int(cfg, "reps")
    seed = _int(cfg, "seed")
    n_grid = _grid(cfg["n_grid"], "n_grid")
    T_grid = _grid(cfg["T_grid"], "T_grid")
    out = Path(cfg.get("output") or f"{cfg['table']}.csv")
    cfg.update(reps=reps, seed=seed, n_grid=list(n_grid), T_grid=list(T_grid),
               rho=_float(cfg, "rho"), nominal=_float(cfg, "nominal"))

    def progress(dgp, alt, n, T):
        print(f"  {dgp} {alt} n={n} T={T}", file=sys.stderr)

    rows = sim.run_table(cfg["table"], reps, n_grid, T_grid, cfg["rho"], seed,
                         cfg["nominal"], _int(cfg, "workers"), progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    sim.write_rows_csv(rows, out)
    record = {k: v for k, v in cfg.items() if k != "workers"}
    man = sim.manifest(record, __version__)
    man_path = out.with_suffix(".manifest.json")
    man_path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} and {man_path} (config hash {man['config_hash'][:12]})")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_common(p):
    p.add_argument("--config", help="key-value config file ([run] section)")
    p.add_argument("--input", help="long CSV with columns unit,time,e1,e2")
    p.add_argument("--distances", help="labelled square distance matrix CSV")
    p.add_argument("--loss", choices=("quadratic", "absolute"))
    p.add_argument("--time-kernel", choices=("bartlett", "truncated"))
    p.add_argument("--bandwidth", help="time bandwidth l_T (integer or 'auto' = floor(T^(1/3)))")
    p.add_argument("--space-kernel", choices=("bartlett", "truncated", "unit"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--distance-threshold", type=float, help="space bandwidth d_n")
    g.add_argument("--distance-quantile", type=float,
                   help="set d_n to this quantile of the pairwise distances")
    p.add_argument("--output", "-o", help="report CSV path (a .txt is written alongside)")


def _add_factor(p):
    p.add_argument("--m", help="number of factors, or 'auto' for IC_p1 selection")
    p.add_argument("--m-max", help="largest m tried by the information criterion")
    p.add_argument("--idio", choices=("shac", "partial_sample", "diagonal", "kernel"),
                   help="idiosyncratic variance estimator for S4/J4")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="panel-epa",
        description="Panel tests of equal predictive ability.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="exit codes: 0 ok, 2 input error, 3 numerical failure, 4 infeasible test",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dm", help="DM test for every unit")
    _add_common(p)
    p.set_defaults(func=cmd_dm)

    p = sub.add_parser("overall", help="overall EPA tests S1..S4")
    _add_common(p)
    _add_factor(p)
    p.add_argument("--estimator", help="comma list of s1, s2, s2_partial, s3, s4")
    p.set_defaults(func=cmd_overall)

    p = sub.add_parser("joint", help="joint EPA tests J1..J4")
    _add_common(p)
    _add_factor(p)
    p.add_argument("--estimator", help="comma list of j1, j2, j3, j4")
    p.add_argument("--standardized", action="store_true", default=None,
                   help="also report Z = (J - n) / sqrt(2n)")
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("cd", help="cross-sectional dependence pretests")
    _add_common(p)
    _add_factor(p)
    p.set_defaults(func=cmd_cd)

    p = sub.add_parser("workflow", help="CD pretests, factor selection and panel tests")
    _add_common(p)
    _add_factor(p)
    p.set_defaults(func=cmd_workflow)

    p = sub.add_parser("simulate", help="Monte Carlo size and power tables")
    p.add_argument("--config", help="key-value config file ([run] section)")
    p.add_argument("--table", choices=sorted(sim.TABLES))
    p.add_argument("--reps")
    p.add_argument("--n-grid", dest="n_grid", help="comma list of n values")
    p.add_argument("--T-grid", dest="T_grid", help="comma list of T values")
    p.add_argument("--rho")
    p.add_argument("--nominal")
    p.add_argument("--seed")
    p.add_argument("--workers")
    p.add_argument("--output", "-o", help="table CSV path (manifest JSON written alongside)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = args.func
    try:
        cfg = resolve(args, SIM_DEFAULTS if args.command == "simulate" else DEFAULTS)
        cfg["command"] = args.command
        return func(cfg)
    except InfeasibleTestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, OSError, EPAError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
