"""Command-line front end.

Every subcommand validates all of its parameters before computing, writes
its tables as CSV or JSON with a schema header, records property checks and
exits with status 0 exactly when every check passed.

Exit codes: 0 success, 1 a property check failed, 2 invalid configuration,
3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._exact import as_rational, fmt_rational

SCHEMA_VERSION = 1
SUBCOMMANDS = ("landau", "heat-trace", "u0", "bnf", "koszul", "bundle")

__all__ = ["ConfigError", "RunConfig", "Report", "parse_config", "parse_grid", "parse_rationals",
           "emit_report", "run", "main", "SCHEMA_VERSION"]


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    out: str | None = None
    fmt: str = "csv"


@dataclass
class Report:
    subcommand: str
    config: dict
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, measured=None, detail: str = ""):
        self.checks.append({"name": name, "passed": bool(passed), "measured": _jsonable(measured), "detail": detail})

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def metadata(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "tool": "magdirac", "version": __version__,
                "subcommand": self.subcommand, "config": _jsonable(self.config),
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}


def _jsonable(v):
    if v is None or isinstance(v, (bool, int, str)):
        return v
    if isinstance(v, float):
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    try:
        return fmt_rational(v)
    except TypeError:
        return repr(v)


# ----------------------------------------------------------------------
# value parsers
# ----------------------------------------------------------------------

def parse_rationals(text: str) -> list:
    """``"1,9/4"`` → exact rationals."""
    items = [t for t in text.split(",")]
    if not text.strip() or any(not t.strip() for t in items):
        raise ValueError(f"empty entry in list {text!r}")
    return [as_rational(t) for t in items]


def parse_floats(text: str) -> list:
    items = text.split(",")
    if not text.strip() or any(not t.strip() for t in items):
        raise ValueError(f"empty entry in list {text!r}")
    out = []
    for t in items:
        t = t.strip()
        out.append(float(as_rational(t)) if "/" in t else float(t))
    return out


def parse_grid(text: str) -> list:
    """Grid specs: ``log:a..b:n``, ``lin:a..b:n`` or a comma list.

    Examples
    --------
    >>> g = parse_grid("log:1e-3..1e-1:20")
    >>> len(g), g[0], round(g[-1], 12)
    (20, 0.001, 0.1)
    """
    text = text.strip()
    for kind in ("log", "lin"):
        if text.startswith(kind + ":"):
            try:
                rng, n = text[len(kind) + 1:].rsplit(":", 1)
                a, b = rng.split("..")
                a, b, n = float(a), float(b), int(n)
            except ValueError as exc:
                raise ValueError(f"bad grid spec {text!r}; expected {kind}:a..b:n") from exc
            if n < 1:
                raise ValueError("grid size must be positive")
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise ValueError("log grid needs positive endpoints")
                return [float(v) for v in np.logspace(math.log10(a), math.log10(b), n)]
            return [float(v) for v in np.linspace(a, b, n)]
    return parse_floats(text)


def parse_phi(text: str):
    """``gaussian:t=1``, ``odd-gaussian:t=1``, ``moment:p=2,t=1`` or ``bump:R=1.2``."""
    from . import trace
    kind, _, rest = text.partition(":")
    kw = {}
    for part in filter(None, rest.split(",")):
        k, eq, v = part.partition("=")
        if not eq:
            raise ValueError(f"bad test-function parameter {part!r}")
        kw[k.strip()] = float(v)
    try:
        if kind == "gaussian":
            return trace.gaussian(kw["t"])
        if kind == "odd-gaussian":
            return trace.odd_gaussian(kw["t"])
        if kind == "moment":
            return trace.gaussian_moment(int(kw["p"]), kw["t"])
        if kind == "bump":
            return trace.bump(kw["R"])
    except KeyError as exc:
        raise ValueError(f"test function {kind!r} needs parameter {exc.args[0]}") from exc
    raise ValueError(f"unknown test function {kind!r}")


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magdirac", description="Semiclassical magnetic Dirac toolkit")
    p.add_argument("--version", action="version", version=f"magdirac {__version__}")
    sub = p.add_subparsers(dest="subcommand")

    def common(sp, default_fmt="csv"):
        sp.add_argument("--out", help="output path (stdout when omitted)")
        sp.add_argument("--format", dest="fmt", default=default_fmt, help="csv or json")
        sp.add_argument("--seed", default="0", help="seed for randomized property suites")

    sp = sub.add_parser("landau", help="model Landau spectrum")
    sp.add_argument("--m", required=True)
    sp.add_argument("--mu", required=True, help="comma list of rationals, e.g. 1,9/4")
    sp.add_argument("--h", required=True)
    sp.add_argument("--lambda-max", required=True)
    sp.add_argument("--oracle-cutoff", help="compare with the truncated matrix at this cutoff")
    common(sp)

    sp = sub.add_parser("heat-trace", help="Mehler trace against the Landau sum")
    sp.add_argument("--m", required=True)
    sp.add_argument("--lambda", dest="lam", required=True)
    sp.add_argument("--t-grid", required=True)
    common(sp)

    sp = sub.add_parser("u0", help="leading trace density on a test function")
    sp.add_argument("--nu", required=True)
    sp.add_argument("--mu", required=True)
    sp.add_argument("--phi", required=True)
    sp.add_argument("--lambda-cap")
    common(sp)

    sp = sub.add_parser("bnf", help="Birkhoff normal form of a model symbol")
    sp.add_argument("--input", required=True)
    sp.add_argument("--N", required=True)
    sp.add_argument("--verify", action="store_true")
    common(sp, "json")

    sp = sub.add_parser("koszul", help="randomized Koszul/Hodge property suite")
    sp.add_argument("--m", default="1")
    sp.add_argument("--mu", default=None)
    sp.add_argument("--Nw", default="4")
    sp.add_argument("--Mc", default="1")
    sp.add_argument("--rho", default="1", help="comma list of x0 coefficients, e.g. 1,1/4")
    sp.add_argument("--samples", default="10")
    common(sp, "json")

    sp = sub.add_parser("bundle", help="circle-bundle Weyl counts and kernel jumps")
    sp.add_argument("--config", help="JSON config file (defaults m=1, epsilon=0.25, chi=[0,1])")
    sp.add_argument("--h-grid", required=True)
    sp.add_argument("--c", default="0.5")
    sp.add_argument("--snap-resonant", action="store_true", help="move each h to the nearest resonance")
    common(sp)
    return p


def _positive_int(name, v, errs, minimum=1):
    try:
        x = int(v)
    except (TypeError, ValueError):
        errs.append(f"{name}: expected an integer, got {v!r}")
        return None
    if x < minimum:
        errs.append(f"{name}: must be >= {minimum}, got {x}")
        return None
    return x


def _positive_float(name, v, errs, allow_zero=False):
    try:
        x = float(as_rational(v)) if isinstance(v, str) and "/" in v else float(v)
    except (TypeError, ValueError):
        errs.append(f"{name}: expected a number, got {v!r}")
        return None
    if not math.isfinite(x) or x < 0 or (x == 0 and not allow_zero):
        errs.append(f"{name}: must be positive, got {v}")
        return None
    return x


def _guard(name, fn, errs):
    try:
        return fn()
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        errs.append(f"{name}: {exc}")
        return None


def parse_config(argv) -> RunConfig:
    """Parse and validate ``argv``; raises :class:`ConfigError` listing every problem.

    Examples
    --------
    >>> cfg = parse_config(["landau", "--m", "2", "--mu", "1,9/4", "--h", "1", "--lambda-max", "2"])
    >>> [str(v) for v in cfg.params["mu"]]
    ['1', '9/4']
    """
    parser = _build_parser()
    errs = []
    if not argv or argv[0] not in SUBCOMMANDS:
        raise ConfigError([f"subcommand: expected one of {', '.join(SUBCOMMANDS)}"])
    sub = parser._subparsers._group_actions[0].choices[argv[0]]
    # collect missing required options ourselves so every problem is reported
    required = [a for a in sub._actions if a.required]
    for a in required:
        a.required = False
    buf = io.StringIO()
    try:
        old = sys.stderr
        sys.stderr = buf
        ns, unknown = parser.parse_known_args(argv)
    except SystemExit:
        raise ConfigError([buf.getvalue().strip().splitlines()[-1] if buf.getvalue() else "invalid arguments"])
    finally:
        sys.stderr = old
        for a in required:
            a.required = True
    prev_flag = False
    for u in unknown:
        if u.startswith("-"):
            errs.append(f"{u.split('=')[0]}: unknown flag")
            prev_flag = "=" not in u
        elif prev_flag:
            prev_flag = False  # value of the unknown flag
        else:
            errs.append(f"{u}: unexpected argument")
    for a in required:
        if getattr(ns, a.dest) is None:
            errs.append(f"{a.option_strings[0]}: required")
    if errs and any("required" in e for e in errs):
        raise ConfigError(errs)

    fmt = ns.fmt
    if fmt not in ("csv", "json"):
        errs.append(f"--format: must be csv or json, got {fmt!r}")
    params = {}
    params["seed"] = _guard("--seed", lambda: int(ns.seed), errs)
    sc = ns.subcommand
    if sc == "landau":
        m = _positive_int("--m", ns.m, errs)
        mu = _guard("--mu", lambda: parse_rationals(ns.mu), errs)
        if mu is not None and (any(v <= 0 for v in mu) or (m is not None and len(mu) != m)):
            errs.append(f"--mu: need {m} positive entries, got {ns.mu!r}")
        h = _guard("--h", lambda: as_rational(ns.h), errs)
        if h is not None and h <= 0:
            errs.append("--h: must be positive")
        lam = _positive_float("--lambda-max", ns.lambda_max, errs)
        cut = _positive_int("--oracle-cutoff", ns.oracle_cutoff, errs, 2) if ns.oracle_cutoff is not None else None
        params.update(m=m, mu=mu, h=h, lambda_max=lam, oracle_cutoff=cut)
    elif sc == "heat-trace":
        m = _positive_int("--m", ns.m, errs)
        lam = _guard("--lambda", lambda: parse_floats(ns.lam), errs)
        if lam is not None and (any(v <= 0 for v in lam) or (m is not None and len(lam) != m)):
            errs.append(f"--lambda: need {m} positive entries, got {ns.lam!r}")
        ts = _guard("--t-grid", lambda: parse_grid(ns.t_grid), errs)
        if ts is not None and any(t <= 0 for t in ts):
            errs.append("--t-grid: times must be positive")
        params.update(m=m, lam=lam, t_grid=ts)
    elif sc == "u0":
        nu = _positive_float("--nu", ns.nu, errs)
        mu = _guard("--mu", lambda: parse_floats(ns.mu), errs)
        if mu is not None and any(v <= 0 for v in mu):
            errs.append("--mu: entries must be positive")
        phi = _guard("--phi", lambda: parse_phi(ns.phi), errs)
        cap = _positive_float("--lambda-cap", ns.lambda_cap, errs) if ns.lambda_cap is not None else None
        if phi is not None and cap is None and phi.gauss_bound is None and phi.support is None:
            errs.append("--lambda-cap: required for this test function")
        params.update(nu=nu, mu=mu, phi=phi, phi_spec=ns.phi, lambda_cap=cap)
    elif sc == "bnf":
        N = _positive_int("--N", ns.N, errs, 0)
        d1 = None
        path = Path(ns.input)
        if not path.is_file():
            errs.append(f"--input: no such file {ns.input!r}")
        else:
            from .bnf import ModelSymbol
            d1 = _guard("--input", lambda: ModelSymbol.from_json(json.loads(path.read_text())), errs)
        if d1 is not None and N is not None and d1.Nw < N + 2:
            errs.append(f"--N: weight cap Nw={d1.Nw} of the input must be at least N+2={N + 2}")
        params.update(N=N, d1=d1, input=ns.input, verify=ns.verify)
    elif sc == "koszul":
        m = _positive_int("--m", ns.m, errs)
        mu = _guard("--mu", lambda: parse_rationals(ns.mu), errs) if ns.mu else ([1] * m if m else None)
        if mu is not None and m is not None and (len(mu) != m or any(v <= 0 for v in mu)):
            errs.append(f"--mu: need {m} positive entries")
        Nw = _positive_int("--Nw", ns.Nw, errs, 2)
        Mc = _positive_int("--Mc", ns.Mc, errs, 0)
        rho = _guard("--rho", lambda: parse_rationals(ns.rho), errs)
        if rho is not None and rho[0] <= 0:
            errs.append("--rho: constant term must be positive")
        n = _positive_int("--samples", ns.samples, errs)
        params.update(m=m, mu=mu, Nw=Nw, Mc=Mc, rho=rho, samples=n)
    elif sc == "bundle":
        from .bundle import BundleConfig
        cfg = None
        if ns.config is None:
            cfg = BundleConfig()
        elif not Path(ns.config).is_file():
            errs.append(f"--config: no such file {ns.config!r}")
        else:
            try:
                raw = Path(ns.config).read_text()
                obj = json.loads(raw) if raw.strip() else {}
                cfg = BundleConfig.from_dict(obj)
            except (ValueError, TypeError) as exc:
                errs.append(f"--config: {exc}")
        hs = _guard("--h-grid", lambda: parse_grid(ns.h_grid), errs)
        if hs is not None and any(v <= 0 for v in hs):
            errs.append("--h-grid: values must be positive")
        c = _positive_float("--c", ns.c, errs, allow_zero=True)
        params.update(cfg=cfg, h_grid=hs, c=c, snap=ns.snap_resonant)
    if errs:
        raise ConfigError(errs)
    return RunConfig(sc, params, ns.out, fmt)


# ----------------------------------------------------------------------
# runners
# ----------------------------------------------------------------------

def _echo(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if k in ("phi", "d1"):
            continue
        if k == "cfg":
            out[k] = v.to_dict()
        else:
            out[k] = v
    return out


def _run_landau(p, rep):
    from .landau import landau_levels, reliable_spectrum
    levels = landau_levels(p["m"], p["mu"], p["h"], p["lambda_max"])
    rep.tables["spectrum"] = {
        "columns": ["eigenvalue", "multiplicity", "tau", "sign"],
        "rows": [[l.eigenvalue, l.multiplicity, " ".join(map(str, l.tau)), l.sign] for l in levels],
    }
    rep.check("multiplicity_law", all(l.multiplicity == (2 ** (l.zeros - 1) if l.zeros else 1) for l in levels))
    cut = p["oracle_cutoff"]
    if cut is not None:
        ev = np.sort(reliable_spectrum(p["m"], p["mu"], p["h"], cut))
        ref = _landau_reference(p["m"], p["mu"], p["h"], cut)
        ok = len(ev) == len(ref)
        dev = float(np.max(np.abs(ev - ref))) if ok else math.inf
        rep.check("oracle_match", ok and dev <= 1e-8, dev, f"cutoff {cut}, {len(ev)} eigenvalues")
        rep.check("one_dimensional_kernel", int(np.sum(np.abs(ev) < 1e-8)) == 1, int(np.sum(np.abs(ev) < 1e-8)))


def _landau_reference(m, mu, h, cutoff):
    import itertools
    vals = [0.0]
    for tau in itertools.product(range(cutoff + 1), repeat=m):
        if not any(tau) or sum(tau) > cutoff:
            continue
        z = sum(1 for t in tau if t)
        ev = math.sqrt(float(h) * sum(t * float(v) for t, v in zip(tau, mu)))
        vals += [ev] * 2 ** (z - 1) + [-ev] * 2 ** (z - 1)
    return np.sort(np.array(vals))


def _run_heat(p, rep):
    from .trace import landau_trace_sum, mehler_trace
    rows, worst = [], 0.0
    for t in p["t_grid"]:
        a = mehler_trace(p["m"], p["lam"], t)
        s = landau_trace_sum(p["m"], p["lam"], t)
        d = abs(a - s.value)
        worst = max(worst, d - s.tail)
        rows.append([t, a, s.value, s.tail, d])
    rep.tables["heat_trace"] = {"columns": ["t", "mehler", "landau_sum", "tail", "abs_diff"], "rows": rows}
    rep.check("mehler_equals_landau_sum", worst <= 1e-10, worst, "max(|diff| - tail)")


def _run_u0(p, rep):
    from .trace import u0_evaluate
    r = u0_evaluate(p["phi"], p["nu"], p["mu"], p["lambda_cap"])
    rep.tables["u0"] = {"columns": ["phi", "value", "lambda_cap", "tail"],
                        "rows": [[p["phi_spec"], r.value, r.lambda_cap, r.tail]]}
    if p["phi"].parity == -1:
        rep.check("vanishes_on_odd", abs(r.value) <= 1e-12, r.value)
    if p["phi_spec"].startswith(("gaussian", "bump")):
        rep.check("positivity", r.value >= 0, r.value)


def _run_bnf(p, rep):
    from .bnf import birkhoff_normal_form, verify_normal_form
    from .koszul import twisted_laplacian0
    d1 = p["d1"]
    res = birkhoff_normal_form(d1, p["N"])
    rep.extra["result"] = res.to_json()
    rep.extra["a_min_weight"] = res.a_min_weight
    rep.check("omega_twisted_harmonic", twisted_laplacian0(res.omega, d1.data).is_zero())
    rep.check("omega_xi0_free", res.omega.xi0_free())
    if p["verify"]:
        prof = verify_normal_form(d1, res)
        rep.extra["defect_profile"] = {str(w): v for w, v in prof.items()}
        bad = {w: v for w, v in prof.items() if w <= p["N"] and v != 0}
        rep.check("zero_defect_through_N", not bad, max(bad.values()) if bad else 0.0)
        rep.tables["defect"] = {"columns": ["weight", "max_abs_defect"], "rows": [[w, v] for w, v in sorted(prof.items())]}


def random_chain(rng: random.Random, m: int, Nw: int, Mc: int, n_terms: int = 4, min_weight: int = 0):
    """Random exact chain element with small integer coefficients."""
    from .koszul import ChainElement
    from .weyl import weight, transverse_degree
    n = 2 * m + 1
    L = 2 * n + 1
    terms = {}
    attempts = 0
    while len(terms) < n_terms and attempts < 10000:
        attempts += 1
        e = [rng.randint(0, 2) for _ in range(L)]
        e[-1] = 0
        if not (min_weight <= weight(e, m) <= Nw) or transverse_degree(e, m) > Mc:
            continue
        c = rng.randint(-3, 3)
        if c:
            terms[(tuple(e), rng.randrange(1 << n))] = c
    return ChainElement(m, Nw, Mc, terms)


def _run_koszul(p, rep):
    from .koszul import (KoszulData, apply_differential, hodge_decompose, twisted_laplacian0, DIFFERENTIALS)
    from .weyl import TransverseSeries
    rng = random.Random(p["seed"])
    m, Nw, Mc = p["m"], p["Nw"], p["Mc"]
    rho = TransverseSeries.x0_poly(m, Nw + Mc, p["rho"]) if len(p["rho"]) > 1 else p["rho"][0]
    data = KoszulData(m, p["mu"], rho=rho)
    sq_fail, hodge_fail, rows = 0, 0, []
    for i in range(p["samples"]):
        u = random_chain(rng, m, Nw, Mc)
        for name in DIFFERENTIALS:
            # the twisted W-differentials square to zero only for constant rho
            if name in ("wt_d", "it_d") and not data.rho_is_constant:
                continue
            if not apply_differential(name, apply_differential(name, u, data), data).is_zero():
                sq_fail += 1
        res = hodge_decompose(u, data)
        harmonic = twisted_laplacian0(res.harmonic, data).is_zero() and res.harmonic.xi0_free()
        ok = res.residual.is_zero() and harmonic
        hodge_fail += not ok
        rows.append([i, max(u.weights()) if u.terms else 0, len(u.terms), ok])
    rep.tables["koszul"] = {"columns": ["sample", "weight", "terms", "hodge_ok"], "rows": rows}
    rep.check("pure_differentials_square_to_zero", sq_fail == 0, sq_fail)
    rep.check("hodge_recomposition_and_harmonicity", hodge_fail == 0, hodge_fail)


def _run_bundle(p, rep):
    from .bundle import resonant_h, scaling_exponent_fit, weyl_count_and_kernel
    cfg, c = p["cfg"], p["c"]
    hs = list(p["h_grid"])
    if p["snap"]:
        hs = [resonant_h(cfg, max(round(1 / h - cfg.epsilon + cfg.m / 2), cfg.kodaira_kmin)) for h in hs]
    samples = [weyl_count_and_kernel(cfg, h, c) for h in hs]
    rep.tables["bundle"] = {"columns": ["h", "N", "k_h", "eta_erfc"],
                            "rows": [[s.h, s.N, s.k_h, s.eta_erfc] for s in samples]}
    fits = []
    for stat in ("N", "k_h"):
        try:
            slope, err = scaling_exponent_fit(samples, stat)
            fits.append([stat, slope, err, ""])
        except ValueError as exc:
            fits.append([stat, None, None, str(exc)])
    rep.tables["fit"] = {"columns": ["stat", "slope", "stderr", "note"], "rows": fits}
    mono = all(weyl_count_and_kernel(cfg, s.h, c / 2).N <= s.N for s in samples)
    rep.check("window_monotone", mono)
    res_ok = all((s.k_h > 0) == (abs(1 / s.h - cfg.epsilon + cfg.m / 2 - round(1 / s.h - cfg.epsilon + cfg.m / 2)) <= 1e-9)
                 for s in samples)
    rep.check("resonance_structure", res_ok)


_RUNNERS = {"landau": _run_landau, "heat-trace": _run_heat, "u0": _run_u0, "bnf": _run_bnf,
            "koszul": _run_koszul, "bundle": _run_bundle}


def run(cfg: RunConfig) -> Report:
    rep = Report(cfg.subcommand, _echo(cfg.params))
    _RUNNERS[cfg.subcommand](cfg.params, rep)
    return rep


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _csv_text(rep: Report) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n# tool: magdirac {__version__}\n# subcommand: {rep.subcommand}\n")
    w = csv.writer(buf, lineterminator="\n")
    for name, tab in rep.tables.items():
        buf.write(f"# table: {name}\n")
        w.writerow(tab["columns"])
        for row in tab["rows"]:
            w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _json_obj(rep: Report) -> dict:
    obj = rep.metadata()
    obj["tables"] = _jsonable(rep.tables)
    obj["checks"] = rep.checks
    obj["passed"] = rep.ok
    obj.update(_jsonable(rep.extra))
    return obj


def emit_report(rep: Report, cfg: RunConfig) -> list:
    """Write the report; returns the paths written (empty when printing to stdout).

    CSV output carries the tables; the metadata and check summary go to a
    sibling ``<out>.report.json`` so failures stay machine readable.
    """
    if cfg.fmt == "json":
        text = json.dumps(_json_obj(rep), indent=1) + "\n"
    else:
        text = _csv_text(rep)
    if cfg.out is None:
        sys.stdout.write(text)
        if cfg.fmt == "csv":
            for c in rep.checks:
                sys.stdout.write(f"# check {c['name']}: {'PASS' if c['passed'] else 'FAIL'} ({c['measured']})\n")
        return []
    out = Path(cfg.out)
    out.write_text(text)
    paths = [out]
    if cfg.fmt == "csv":
        side = out.with_name(out.name + ".report.json")
        meta = rep.metadata()
        meta["checks"] = rep.checks
        meta["passed"] = rep.ok
        side.write_text(json.dumps(meta, indent=1) + "\n")
        paths.append(side)
    return paths


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help", "--version"):
        try:
            _build_parser().parse_args(argv or ["--help"])
        except SystemExit as exc:
            return int(exc.code or 0)
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        rep = run(cfg)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    try:
        emit_report(rep, cfg)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 3
    for c in rep.checks:
        if not c["passed"]:
            print(f"check failed: {c['name']} (measured {c['measured']})", file=sys.stderr)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
