"""Command-line front end: ``countlab pmf|sample|fit|verify``.

Exit codes: 0 success, 1 verification failure, 2 usage or validation
error, 3 fit did not converge (the result is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from countlab import dist_core as dc
from countlab import fitting, samplers
from countlab.errors import ConfigError, CountlabError
from countlab.verify.suite import SuiteConfig, run_theorem_suite

log = logging.getLogger("countlab")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3

SEED_ENV = "COUNTLAB_SEED"

FAMILIES = ("poisson", "gamma", "negbin", "dirichlet", "multinomial", "dirmult")
FIT_FAMILIES = ("poisson", "negbin", "dirmult")
CONTINUOUS = ("gamma", "dirichlet")


class UsageError(Exception):
    """Bad command-line input; reported with exit code 2."""


@dataclass
class CliConfig:
    subcommand: str
    family: Optional[str] = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    stream: int = 0
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    output_format: str = "csv"
    header: bool = False
    n: int = 1
    construction: str = "default"
    config_path: Optional[str] = None
    only: Optional[list] = None
    jobs: int = 1


# ---------------------------------------------------------------------------
# Formatting and parsing
# ---------------------------------------------------------------------------


def format_real(v) -> str:
    """Shortest text that parses back to the same 64-bit float."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else format_real(v)
    return obj


def parse_params(tokens) -> dict:
    """``k=v,...`` pairs; a value-only token extends the previous key.

    So ``alphas=1,2,3,m=4`` gives ``{"alphas": ["1", "2", "3"], "m": ["4"]}``.
    """
    out: dict = {}
    key = None
    for chunk in tokens or ():
        for tok in chunk.split(","):
            tok = tok.strip()
            if not tok:
                continue
            if "=" in tok:
                key, _, value = tok.partition("=")
                key = key.strip()
                if not key:
                    raise UsageError(f"parameter token {tok!r} has no name")
                if key in out:
                    raise UsageError(f"parameter {key!r} given twice")
                out[key] = [value.strip()] if value.strip() else []
            elif key is None:
                raise UsageError(f"parameter value {tok!r} has no name before it")
            else:
                out[key].append(tok)
    return out


def _real(params, key, default=None) -> float:
    if key not in params:
        if default is None:
            raise UsageError(f"missing parameter {key!r}")
        return default
    vals = params[key]
    if len(vals) != 1:
        raise UsageError(f"parameter {key!r} takes one value, got {len(vals)}")
    try:
        return float(vals[0])
    except ValueError:
        raise UsageError(f"parameter {key!r}: {vals[0]!r} is not a number") from None


def _int(params, key) -> int:
    v = _real(params, key)
    if v != math.floor(v):
        raise UsageError(f"parameter {key!r} must be an integer, got {v!r}")
    return int(v)


def _vector(params, key) -> tuple:
    if key not in params or not params[key]:
        raise UsageError(f"missing parameter {key!r}")
    try:
        return tuple(float(v) for v in params[key])
    except ValueError:
        raise UsageError(f"parameter {key!r} must be a list of numbers") from None


def _allow(params, *keys):
    extra = set(params) - set(keys)
    if extra:
        raise UsageError(f"unknown parameters {sorted(extra)}; expected {list(keys)}")


def build_param(family: str, params: dict):
    """Validated dist_core parameter object for ``family``."""
    if family == "poisson":
        _allow(params, "lambda")
        return dc.PoissonParam(_real(params, "lambda"))
    if family == "gamma":
        _allow(params, "alpha", "beta")
        return dc.GammaParam(_real(params, "alpha"), _real(params, "beta", 1.0))
    if family == "negbin":
        _allow(params, "alpha", "theta", "mu")
        alpha = _real(params, "alpha")
        if ("theta" in params) == ("mu" in params):
            raise UsageError("negbin needs exactly one of 'theta' or 'mu'")
        if "mu" in params:
            return dc.negbin_from_mean(alpha, _real(params, "mu"))
        return dc.NegBinParam(alpha, _real(params, "theta"))
    if family == "dirichlet":
        _allow(params, "alphas")
        return dc.DirichletParam(_vector(params, "alphas"))
    if family == "multinomial":
        _allow(params, "m", "probs")
        return dc.MultinomialParam(_int(params, "m"), _vector(params, "probs"))
    if family == "dirmult":
        _allow(params, "m", "alphas", "theta")
        return dc.DirMultParam(_int(params, "m"), _vector(params, "alphas"))
    raise UsageError(f"unknown family {family!r}; choose from {list(FAMILIES)}")


def read_rows(path: Optional[str], real: bool) -> list:
    """Comma-separated numeric rows; blank lines and ``#`` comments are skipped.

    Raises ``UsageError`` naming the 1-based row and field of the first bad value.
    """
    try:
        if path is None or path == "-":
            lines = sys.stdin.read().splitlines()
        else:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}") from None
    rows = []
    for row_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        row = []
        for field_no, tok in enumerate(text.split(","), start=1):
            tok = tok.strip()
            try:
                value = float(tok)
                if not real:
                    if not value.is_integer() or value < 0:
                        raise ValueError
                    value = int(value)
            except ValueError:
                kind = "a real number" if real else "a non-negative integer"
                raise UsageError(f"row {row_no}, field {field_no}: {tok!r} is not {kind}") from None
            row.append(value)
        rows.append((row_no, row))
    return rows


def _write(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write output: {exc}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _log_density(param, row):
    if isinstance(param, dc.PoissonParam):
        return dc.poisson_log_pmf(param, _scalar_row(row))
    if isinstance(param, dc.GammaParam):
        return dc.gamma_log_pdf(param, float(_scalar_row(row)))
    if isinstance(param, dc.NegBinParam):
        return dc.negbin_log_pmf(param, _scalar_row(row))
    if isinstance(param, dc.DirichletParam):
        return dc.dirichlet_log_pdf(param, row)
    if isinstance(param, dc.MultinomialParam):
        return dc.multinomial_log_pmf(param, row)
    return dc.dirmult_log_pmf(param, row)


def _scalar_row(row):
    if len(row) != 1:
        raise dc.DimensionMismatchError(f"expected one value per row, got {len(row)}")
    return row[0]


def cmd_pmf(cfg: CliConfig) -> int:
    param = build_param(cfg.family, cfg.params)
    rows = read_rows(cfg.input_path, real=cfg.family in CONTINUOUS)
    values = []
    for row_no, row in rows:
        try:
            values.append(float(_log_density(param, row)))
        except CountlabError as exc:
            raise UsageError(f"row {row_no}: {exc}") from None
    if cfg.output_format == "json":
        text = json.dumps({"family": cfg.family, "log_density": _json_safe(values)}, indent=2) + "\n"
    else:
        lines = (["log_density"] if cfg.header else []) + [format_real(v) for v in values]
        text = "".join(line + "\n" for line in lines)
    _write(text, cfg.output_path)
    return EXIT_OK


def _sampler(cfg: CliConfig) -> Callable:
    family, params = cfg.family, dict(cfg.params)
    conditioned = cfg.construction == "conditioned"
    if conditioned and family not in ("multinomial", "dirmult"):
        raise UsageError("--construction=conditioned applies to multinomial and dirmult only")
    if family == "multinomial" and conditioned:
        p = build_param(family, params)
        lam = tuple(p.m * v for v in p.probs) if p.m > 0 else tuple(p.probs)
        return lambda r, n: samplers.sample_multinomial_by_conditioning(r, lam, p.m, n)
    if family == "dirmult":
        theta = params.get("theta")
        if theta is not None and not conditioned:
            raise UsageError("'theta' is only used with --construction=conditioned")
        p = build_param(family, params)
        if conditioned:
            th = _real(params, "theta") if theta is not None else p.m / (p.m + p.alpha0)
            if p.m == 0:
                th = 0.5  # any theta conditions onto the all-zero outcome
            return lambda r, n: samplers.sample_dirmult_by_conditioning(r, p.alphas, th, p.m, n)
        return lambda r, n: samplers.sample_dirmult(r, p, n)
    p = build_param(family, params)
    fn = {
        dc.PoissonParam: samplers.sample_poisson,
        dc.GammaParam: samplers.sample_gamma,
        dc.NegBinParam: samplers.sample_negbin,
        dc.DirichletParam: samplers.sample_dirichlet,
        dc.MultinomialParam: samplers.sample_multinomial,
    }[type(p)]
    return lambda r, n: fn(r, p, n)


def _header_for(family: str, width: int) -> str:
    if width == 1:
        return "x"
    prefix = "z" if family == "dirichlet" else "x"
    return ",".join(f"{prefix}{i + 1}" for i in range(width))


def cmd_sample(cfg: CliConfig) -> int:
    if cfg.n < 1:
        raise UsageError("--n must be at least 1")
    draw = _sampler(cfg)
    r = samplers.RngStream(cfg.seed, cfg.stream)
    out = np.asarray(draw(r, cfg.n))
    rows = out.reshape(cfg.n, -1)
    real = cfg.family in CONTINUOUS
    fmt = format_real if real else (lambda v: str(int(v)))
    if cfg.output_format == "json":
        data = [[float(v) if real else int(v) for v in row] for row in rows]
        if rows.shape[1] == 1:
            data = [row[0] for row in data]
        text = json.dumps({"family": cfg.family, "seed": cfg.seed, "stream": cfg.stream,
                           "draws": _json_safe(data)}, indent=2) + "\n"
    else:
        lines = [_header_for(cfg.family, rows.shape[1])] if cfg.header else []
        lines += [",".join(fmt(v) for v in row) for row in rows]
        text = "".join(line + "\n" for line in lines)
    _write(text, cfg.output_path)
    return EXIT_OK


def _param_dict(param) -> dict:
    if isinstance(param, dc.PoissonParam):
        return {"lambda": param.lam}
    if isinstance(param, dc.NegBinParam):
        return {"alpha": param.alpha, "theta": param.theta, "mu": param.mu}
    return {"alphas": list(param.alphas), "alpha0": param.alpha0, "m": param.m}


def fit_to_dict(family: str, result: fitting.FitResult) -> dict:
    return _json_safe({
        "family": family,
        "params": _param_dict(result.params),
        "log_likelihood": result.log_likelihood,
        "iterations": result.iterations,
        "converged": result.converged,
        "gradient_norm": result.gradient_norm,
        "status": result.status,
        "flags": result.flags,
        "standard_errors": result.standard_errors,
    })


def cmd_fit(cfg: CliConfig) -> int:
    if cfg.family not in FIT_FAMILIES:
        raise UsageError(f"fit supports {list(FIT_FAMILIES)}, not {cfg.family!r}")
    if cfg.params:
        raise UsageError("fit takes no --params")
    rows = read_rows(cfg.input_path, real=False)
    if not rows:
        raise UsageError("no data rows in input")
    if cfg.family == "dirmult":
        widths = {len(r) for _, r in rows}
        if len(widths) != 1:
            bad = next(no for no, r in rows if len(r) != len(rows[0][1]))
            raise UsageError(f"row {bad}: expected {len(rows[0][1])} fields like row {rows[0][0]}")
        result = fitting.fit_dirmult([r for _, r in rows])
    else:
        data = [v for _, r in rows for v in r]
        result = (fitting.fit_poisson if cfg.family == "poisson" else fitting.fit_negbin)(data)
    _write(json.dumps(fit_to_dict(cfg.family, result), indent=2, allow_nan=False) + "\n",
           cfg.output_path)
    if result.status != fitting.CONVERGED:
        log.warning("fit ended with status %s", result.status)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def load_suite_config(path: Optional[str], only, jobs: int) -> SuiteConfig:
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load configuration {path!r}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
    if only:
        data["only"] = list(only)
    if jobs != 1:
        data["jobs"] = jobs
    return SuiteConfig.from_mapping(data)


def cmd_verify(cfg: CliConfig) -> int:
    suite_cfg = load_suite_config(cfg.config_path, cfg.only, cfg.jobs)
    report = run_theorem_suite(cfg.seed, suite_cfg)
    _write(report.to_json() + "\n", cfg.output_path)
    failed = report.failures()
    log.info("%d checks, %d failed", len(report.checks), len(failed))
    for rec in failed:
        log.error("FAILED %s", rec.name)
    return EXIT_OK if report.overall_passed else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="countlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p, family_required=True):
        p.add_argument("--family", required=family_required, choices=FAMILIES)
        p.add_argument("--out", dest="output_path")
        p.add_argument("--format", dest="output_format", choices=("csv", "json"), default="csv")
        p.add_argument("--header", action="store_true", help="write a CSV header row")

    p = sub.add_parser("pmf", help="log pmf/pdf of each input row")
    common(p)
    p.add_argument("--params", action="append", default=[])
    p.add_argument("--in", dest="input_path")

    p = sub.add_parser("sample", help="draw variates as CSV rows")
    common(p)
    p.add_argument("--params", action="append", default=[])
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--construction", choices=("default", "conditioned"), default="default")

    p = sub.add_parser("fit", help="maximum-likelihood fit; writes JSON")
    p.add_argument("--family", required=True, choices=FIT_FAMILIES)
    p.add_argument("--params", action="append", default=[])
    p.add_argument("--in", dest="input_path")
    p.add_argument("--out", dest="output_path")

    p = sub.add_parser("verify", help="run the theorem suite; writes a JSON report")
    p.add_argument("--config", dest="config_path")
    p.add_argument("--only", help="comma-separated check groups (name or prefix)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", dest="output_path")
    return ap


def _resolve_seed(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _configure_logging(verbose: bool):
    # bind to the current sys.stderr on every call so embedded callers see it
    for h in list(log.handlers):
        if getattr(h, "_countlab_cli", False):
            log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("countlab: %(levelname)s: %(message)s"))
    handler._countlab_cli = True
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    _configure_logging(ns.verbose)
    try:
        cfg = CliConfig(subcommand=ns.subcommand)
        for name in ("family", "input_path", "output_path", "output_format", "header", "n",
                     "stream", "construction", "config_path", "jobs"):
            if hasattr(ns, name):
                setattr(cfg, name, getattr(ns, name))
        cfg.params = parse_params(getattr(ns, "params", None))
        if hasattr(ns, "seed"):
            cfg.seed = _resolve_seed(ns.seed)
        if getattr(ns, "only", None):
            cfg.only = [t for t in ns.only.split(",") if t.strip()]
        handler = {"pmf": cmd_pmf, "sample": cmd_sample, "fit": cmd_fit, "verify": cmd_verify}
        return handler[cfg.subcommand](cfg)
    except (UsageError, CountlabError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
