"""Batch front end: run a configured experiment and write its tables and reports.

Exit status: 0 when every requested check passes, 1 when a check fails,
2 for an invalid configuration and 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import arrivals as arr
from . import responses as resp
from . import verify
from .config import (ClosedFormsCheck, CovarianceCheck, ExperimentConfig, IncrementsCheck, KsCheck,
                     LimitRatioCheck, LindebergCheck, RenewalRateCheck, ScaleTrendCheck, WeakLawCheck,
                     build_scenario, parse_config, preset)
from .errors import ConfigurationError, NumericError, ResourceError
from .limitgauss import beta_fn, limit_cov_matrix, limit_cov_Pi
from .responses import CovarianceModel
from .shotnoise import mc_ensemble

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(x) -> str:
    return repr(float(x))


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(cells) for cells in rows]
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _direction(spec, n: int) -> np.ndarray:
    if spec == "e1":
        return np.eye(n)[0]
    if spec == "en":
        return np.eye(n)[-1]
    if spec == "ones":
        return np.ones(n)
    a = np.asarray(spec, dtype=float)
    if a.shape != (n,):
        raise ConfigurationError(f"direction {spec} must have length {n}")
    return a


def comparison_rows(emp, se, limit):
    n = len(limit)
    rows = []
    for i in range(n):
        for j in range(n):
            diff = emp[i, j] - limit[i, j]
            z = diff / se[i, j] if se[i, j] > 0 else (0.0 if diff == 0 else math.inf)
            rows.append((i, j, emp[i, j], limit[i, j], se[i, j], z))
    return rows


def closed_forms_report(tol: float) -> verify.CheckReport:
    worst = 0.0
    for beta in (-0.5, 0.0, 1.0, 2.0):
        for rho in (0.5, 1.0, 2.0, 3.0):
            if not beta > -min(rho, 1.0):
                continue
            model = CovarianceModel(None, None, lambda u, w, b=beta: np.power(np.minimum(u, w), b), beta)
            for s in (0.5, 1.0, 2.0, 3.5):
                for t in (0.5, 1.0, 2.0, 3.5):
                    value, _ = limit_cov_Pi(model, rho, s, t, tol)
                    exact = rho * beta_fn(beta + 1, rho) * min(s, t) ** (beta + rho)
                    worst = max(worst, abs(value - exact))
    beta_gaps = [abs(beta_fn(1, 1) - 1.0), abs(beta_fn(0.5, 0.5) - math.pi) / math.pi, abs(beta_fn(0.5, 1) - 2.0) / 2.0]
    passed = worst <= 10 * tol and max(beta_gaps) <= 1e-12
    return verify.CheckReport("closed_forms", [], [worst] + beta_gaps,
                              f"max |Pi - closed form| <= {10 * tol:g}; beta-function relative error <= 1e-12",
                              passed, {"tol": tol})


def run_experiment(cfg: ExperimentConfig, threads: int = 1):
    """Compute everything, then return ``(exit_status, {filename: text})``."""
    tol = cfg.tolerances
    files: dict[str, str] = {}
    reports: list[dict] = []
    scenario = build_scenario(cfg.scenario) if cfg.scenario is not None else None
    # build every checker's models up front so configuration errors surface before computing
    prepared = []
    for check in cfg.checks:
        if isinstance(check, (WeakLawCheck, IncrementsCheck, RenewalRateCheck)):
            prepared.append((check, arr.arrival_from_dict(check.arrival)))
        elif isinstance(check, (LindebergCheck, LimitRatioCheck)):
            prepared.append((check, resp.response_from_dict(check.response)))
        else:
            prepared.append((check, None))

    if scenario is not None:
        ensemble = mc_ensemble(scenario, cfg.seed, threads=threads)
        limit = limit_cov_matrix(scenario.response.covariance_model(), scenario.rho, scenario.grid, tol.quad_tol)
        _, emp, se = verify.empirical_cov(ensemble)
        table = comparison_rows(emp, se, limit.matrix)
        files["ensemble.csv"] = _csv(
            ["replicate", "u", "value"],
            ((str(r), _fmt(u), _fmt(ensemble[r, i])) for r in range(len(ensemble)) for i, u in enumerate(scenario.grid)))
        limit_head = ["u"] + [_fmt(u) for u in scenario.grid]
        files["limit_covariance.csv"] = _csv(
            limit_head, ([_fmt(u)] + [_fmt(v) for v in row] for u, row in zip(scenario.grid, limit.matrix)))
        files["comparison.csv"] = _csv(
            ["i", "j", "empirical", "limit", "se", "z-score"],
            ((str(i), str(j), _fmt(e), _fmt(lv), _fmt(s), _fmt(z)) for i, j, e, lv, s, z in table))

    for check, model in prepared:
        if isinstance(check, CovarianceCheck):
            wanted = None if check.entries == "all" else {tuple(e) for e in check.entries}
            zs = [abs(z) for i, j, *_, z in table if wanted is None or (i, j) in wanted]
            reports.append(verify.CheckReport(
                "covariance", [scenario.t], [max(zs)],
                f"every selected |empirical - limit| / se <= {tol.z_max:g}",
                bool(max(zs) <= tol.z_max),
                {"entries": check.entries if wanted is None else sorted(wanted), "replicates": len(ensemble)}).to_dict())
        elif isinstance(check, KsCheck):
            n = scenario.n
            dirs = [_direction(d, n) for d in check.directions]
            seeds = [cfg.seed + k for k in range(check.seeds)]
            good = 0
            for k, seed in enumerate(seeds):
                ens = ensemble if k == 0 else mc_ensemble(scenario, seed, threads=threads)
                seed_ok = True
                for a in dirs:
                    rep = verify.ks_normal_test(ens, limit, a, alpha=tol.ks_alpha)
                    d = rep.to_dict()
                    d["seed"] = seed
                    reports.append(d)
                    seed_ok &= rep.passed
                good += seed_ok
            frac = good / len(seeds)
            reports.append(verify.CheckReport(
                "ks_seed_fraction", [scenario.t], [frac],
                f"fraction of seeds with p > {tol.ks_alpha:g} for every direction >= {check.min_pass_fraction:g}",
                bool(frac >= check.min_pass_fraction), {"seeds": seeds}).to_dict())
        elif isinstance(check, ScaleTrendCheck):
            i, j = check.entry
            gaps = []
            for t in check.scales:
                sc = build_scenario(cfg.scenario, t=t)
                ens = mc_ensemble(sc, cfg.seed, threads=threads)
                _, c_emp, _ = verify.empirical_cov(ens)
                gaps.append(float(abs(c_emp[i, j] - limit.matrix[i, j])))
            reports.append(verify.CheckReport(
                "scale_trend", list(check.scales), gaps,
                f"|empirical - limit| at entry ({i}, {j}) does not increase with the scale",
                bool(np.all(np.diff(gaps) <= 0)), {"entry": [i, j]}).to_dict())
        elif isinstance(check, WeakLawCheck):
            reports.append(verify.check_weak_law(model, check.c, check.rho, check.T, check.scales,
                                                 check.replicates, cfg.seed).to_dict())
        elif isinstance(check, IncrementsCheck):
            reports.append(verify.check_increments(model, check.rho, check.scales, check.replicates, cfg.seed).to_dict())
        elif isinstance(check, LindebergCheck):
            reports.append(verify.check_lindeberg(model, check.rho, check.y, check.scales,
                                                  check.replicates, cfg.seed).to_dict())
        elif isinstance(check, LimitRatioCheck):
            reports.append(verify.check_limit_ratio(model, check.w, check.a, check.b, check.scales).to_dict())
        elif isinstance(check, RenewalRateCheck):
            reports.append(verify.renewal_rate(model, check.rate, check.scales, check.tolerances,
                                               check.replicates, cfg.seed).to_dict())
        elif isinstance(check, ClosedFormsCheck):
            reports.append(closed_forms_report(tol.quad_tol).to_dict())

    files["reports.json"] = _json({"reports": reports})
    files["manifest.json"] = _json({
        "config": cfg.model_dump(mode="json", exclude={"output_directory"}),
        "seed": cfg.seed,
        "versions": {"immigrationlab": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "files": sorted(files) + ["manifest.json"],
    })
    return exit_status(reports), files


def exit_status(reports: list[dict]) -> int:
    checked = [r["passed"] for r in reports if r.get("passed") is not None and "name" in r]
    return EXIT_OK if all(checked) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="immigrationlab", description=__doc__.splitlines()[0])
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="experiment configuration (JSON)")
    src.add_argument("--preset", help="built-in experiment name")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--replicates", type=int, help="override the scenario replicate count")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes the output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            try:
                data = json.loads(args.config.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"cannot read {args.config}: {exc}") from None
        else:
            data = preset(args.preset)
        if args.seed is not None:
            data["seed"] = args.seed
        if args.replicates is not None:
            if "scenario" not in data:
                raise ConfigurationError("--replicates needs a configuration with a scenario")
            data["scenario"]["replicates"] = args.replicates
        cfg = parse_config(data)
        out = args.out or (Path(cfg.output_directory) if cfg.output_directory else Path("results"))
        status, files = run_experiment(cfg, threads=max(1, args.threads))
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ResourceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8", newline="\n")
    for report in json.loads(files["reports.json"])["reports"]:
        if "name" in report:
            print(f"{'PASS' if report['passed'] else 'FAIL'}  {report['name']}: {report['threshold']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
