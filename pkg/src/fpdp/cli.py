"""Command-line front end.

Runs are configured by an INI file with ``[mechanism]``, ``[model]``,
``[verify]``, ``[attack]`` and ``[output]`` sections; any key can be
overridden on the command line with ``--set section.key=value``.  All reports
are JSON with sorted keys and round-trip float precision, so identical
invocations produce byte-identical output.

Exit codes: 0 success or PASS, 1 usage or configuration error, 2 analysis
failure (uncertifiable parameters or a failed verification).
"""

from __future__ import annotations

import configparser
import csv as _csv
import json
import math
import random
import sys
from fractions import Fraction
from typing import Optional

import click

from . import attacks, distributions, geometry, mechanisms, robustness
from .distributions import (
    EXCEPTION,
    DiscreteDistribution,
    RoundingGrid,
    wasserstein_inf,
)
from .mechanisms import LAPLACE, NONE, PLANAR, PrivacyParams
from .numrep import UniformGeneratorModel, named_bias

# the spec for this tool reserves exit code 2 for analysis failures
click.exceptions.UsageError.exit_code = 1

PASS_EXIT, CONFIG_EXIT, FAIL_EXIT = 0, 1, 2


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(obj, path: Optional[str]) -> None:
    text = _dump(obj)
    click.echo(text, nl=False)
    if path:
        with open(path, "w") as fh:
            fh.write(text)


class ConfigError(Exception):
    pass


def _load_config(path: Optional[str], overrides: tuple[str, ...]) -> dict:
    cfg: dict[str, dict[str, str]] = {}
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path!r}")
        cfg = {s: dict(parser.items(s)) for s in parser.sections()}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        key, value = item.split("=", 1)
        section, name = key.split(".", 1)
        cfg.setdefault(section, {})[name.strip()] = value.strip()
    return cfg


def _get(cfg: dict, section: str, key: str, default=None, required: bool = False):
    value = cfg.get(section, {}).get(key)
    if value is None or value == "":
        if required:
            raise ConfigError(f"missing config value [{section}] {key}")
        return default
    return value


def _get_float(cfg, section, key, default=None, required=False) -> Optional[float]:
    raw = _get(cfg, section, key, None, required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be a number: {raw!r}") from exc


def _get_int(cfg, section, key, default=None, required=False) -> Optional[int]:
    raw = _get(cfg, section, key, None, required)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be an integer: {raw!r}") from exc


def _get_bool(cfg, section, key, default=False) -> bool:
    raw = _get(cfg, section, key)
    if raw is None:
        return default
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key} must be a boolean: {raw!r}")


def _get_json(cfg, section, key, default=None, required=False):
    raw = _get(cfg, section, key, None, required)
    if raw is None:
        return default
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"[{section}] {key} is not valid JSON: {raw!r}") from exc


def _mechanism_setup(cfg: dict):
    noise = _get(cfg, "mechanism", "noise", "laplace")
    if noise not in (LAPLACE, PLANAR, NONE):
        raise ConfigError(f"unknown noise kind {noise!r}")
    eps = _get_float(cfg, "mechanism", "eps", required=True)
    delta_f = _get_float(cfg, "mechanism", "delta_f", 1.0)
    delta_impl = _get_float(cfg, "mechanism", "delta_impl", 0.0)
    sensitivity = mechanisms.inflated_sensitivity(delta_f, delta_impl)
    region = geometry.region_from_json(
        _get_json(cfg, "mechanism", "region", required=True))
    cell_side = _get_float(cfg, "mechanism", "cell_side", required=True)
    dim = 2 if noise == PLANAR else 1
    origin = _get_json(cfg, "mechanism", "grid_origin", 0.0)
    if dim == 2 and isinstance(origin, (int, float)):
        origin = (float(origin), float(origin))
    grid = RoundingGrid(origin if dim == 2 else (float(origin),), cell_side, dim)
    params = PrivacyParams(eps=eps, sensitivity=sensitivity) if noise != NONE else None
    return noise, params, region, grid


def _model_setup(cfg: dict) -> tuple[UniformGeneratorModel, float]:
    n = _get_int(cfg, "model", "n", 1 << 16)
    delta0 = _get_float(cfg, "model", "delta0", 0.0)
    delta_n = _get_float(cfg, "model", "delta_n", 0.0)
    bias_spec = _get(cfg, "model", "bias", "identity")
    bias = named_bias(bias_spec, n, delta0)
    return UniformGeneratorModel(N=n, delta0=delta0, bias=bias), delta_n


def _build_budget(cfg: dict) -> robustness.RobustnessBudget:
    noise, params, region, grid = _mechanism_setup(cfg)
    if noise == NONE:
        raise ConfigError("cannot build a privacy budget without noise")
    model, delta_n = _model_setup(cfg)
    tail_slack = _get_float(cfg, "mechanism", "tail_slack")
    use_fixpoint = _get_bool(cfg, "mechanism", "fixpoint", False)
    if noise == LAPLACE:
        if not isinstance(region, geometry.Interval):
            raise ConfigError("laplace noise needs an interval region")
        if use_fixpoint:
            def oracle(domain):
                return (robustness.lipschitz_bound_1d(
                    params.eps, params.sensitivity, domain.diameter()), delta_n)
            pre = robustness.safe_preimage_fixpoint(
                region, tail_slack if tail_slack is not None else 0.0,
                model.delta0, oracle)
            ratio = robustness.rounding_ratio(grid.side, pre.shift, 1)
            return robustness.RobustnessBudget(
                epsilon=params.eps, sensitivity=params.sensitivity,
                lipschitz_k=pre.k, gen_bias_bound=model.delta0,
                impl_error_bound=pre.impl_error, shift=pre.shift,
                cell_side=grid.side, mass_ratio=ratio,
                degraded_epsilon=robustness.degraded_epsilon(
                    params.eps, ratio, grid.side, pre.shift, params.sensitivity),
                dimension=1, region_diameter=region.diameter(),
                tail_slack=pre.shift if tail_slack is None else tail_slack,
                mass_ratio_volume_form=robustness.rounding_ratio_volume_form(
                    grid.side, pre.shift, 1))
        return robustness.budget_1d(params.eps, params.sensitivity, region,
                                    model.delta0, delta_n, grid.side,
                                    tail_slack)
    if not isinstance(region, geometry.Disc):
        raise ConfigError("planar noise needs a disc region")
    r_override = _get_float(cfg, "mechanism", "r_override")
    return robustness.budget_2d(params.eps, params.sensitivity, region,
                                model.delta0, delta_n, grid.side, tail_slack,
                                r_override)


@click.group()
def main() -> None:
    """Finite-precision differential privacy: analysis, attacks, verification."""


def _config_options(fn):
    fn = click.option("--config", "-c", type=click.Path(), default=None,
                      help="INI configuration file.")(fn)
    fn = click.option("--set", "-s", "overrides", multiple=True,
                      help="Override a config value: section.key=value.")(fn)
    fn = click.option("--output", "-o", "out_path", type=click.Path(),
                      default=None, help="Also write the JSON report here.")(fn)
    return fn


@main.command()
@_config_options
def analyze(config, overrides, out_path) -> None:
    """Compute the robustness budget and the degraded privacy level."""
    try:
        cfg = _load_config(config, overrides)
        budget = _build_budget(cfg)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, (robustness.DegenerateGridError,)):
            click.echo(f"uncertifiable: {exc}", err=True)
            sys.exit(FAIL_EXIT)
        click.echo(f"config error: {exc}", err=True)
        sys.exit(CONFIG_EXIT)
    except robustness.DivergenceError as exc:
        click.echo(f"uncertifiable: {exc}", err=True)
        sys.exit(FAIL_EXIT)
    _emit(budget.to_json(), out_path or _get(cfg, "output", "json"))


@main.command()
@_config_options
def verify(config, overrides, out_path) -> None:
    """Enumerate the corrected mechanism and check the certified level."""
    try:
        cfg = _load_config(config, overrides)
        correction = _get(cfg, "mechanism", "correction", "full")
        if correction == "none":
            report = _verify_uncorrected(cfg)
        else:
            report = _verify_corrected(cfg)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, robustness.DegenerateGridError):
            click.echo(f"uncertifiable: {exc}", err=True)
            sys.exit(FAIL_EXIT)
        click.echo(f"config error: {exc}", err=True)
        sys.exit(CONFIG_EXIT)
    except (robustness.DivergenceError, distributions.EnumerationBudgetError) as exc:
        click.echo(f"verification impossible: {exc}", err=True)
        sys.exit(FAIL_EXIT)
    _emit(report, out_path or _get(cfg, "output", "json"))
    sys.exit(PASS_EXIT if report["pass"] else FAIL_EXIT)


def _verify_corrected(cfg: dict) -> dict:
    noise, params, region, grid = _mechanism_setup(cfg)
    model, _ = _model_setup(cfg)
    budget = _build_budget(cfg)
    pairs = _get_json(cfg, "verify", "pairs", [[0.0, params.sensitivity]])
    signed = _get_bool(cfg, "mechanism", "signed")
    remap = _get_bool(cfg, "mechanism", "remap")
    cell_aligned = _get_bool(cfg, "mechanism", "cell_aligned")
    noise_vals = mechanisms.noise_value_arrays(noise, params, model)
    results = []
    worst = 0.0
    for r1, r2 in pairs:
        d1 = mechanisms.output_distribution(r1, noise, params, region, grid,
                                            model, signed=signed, remap=remap,
                                            cell_aligned=cell_aligned,
                                            noise=noise_vals)
        d2 = mechanisms.output_distribution(r2, noise, params, region, grid,
                                            model, signed=signed, remap=remap,
                                            cell_aligned=cell_aligned,
                                            noise=noise_vals)
        eps_hat = distributions.empirical_epsilon(d1, d2)
        worst = max(worst, eps_hat)
        results.append({"r1": r1, "r2": r2, "empirical_eps": _enc_inf(eps_hat)})
    ok = worst <= budget.degraded_epsilon
    return {
        "epsilon": budget.epsilon,
        "degraded_epsilon": budget.degraded_epsilon,
        "worst_empirical_eps": _enc_inf(worst),
        "pairs": results,
        "pass": bool(ok),
    }


def _verify_uncorrected(cfg: dict) -> dict:
    n_exp = _get_int(cfg, "attack", "n_exp", 2)
    d = _get_int(cfg, "attack", "d", 6)
    r1 = _get_float(cfg, "attack", "r1", 0.0)
    r2 = _get_float(cfg, "attack", "r2", 1.0 + 2.0 ** -5)
    n = _get_int(cfg, "attack", "n", 1 << 16)
    eps = _get_float(cfg, "mechanism", "eps", 1.0)
    report = attacks.fixedpoint_attack(n_exp, d, r1, r2, n)
    ok = report.empirical_eps <= eps
    return {
        "epsilon": eps,
        "degraded_epsilon": eps,
        "worst_empirical_eps": _enc_inf(report.empirical_eps),
        "pairs": [{"r1": r1, "r2": r2,
                   "empirical_eps": _enc_inf(report.empirical_eps)}],
        "pass": bool(ok),
    }


def _enc_inf(x: float):
    if math.isinf(x):
        return "inf"
    return x


@main.group()
def attack() -> None:
    """Reproduce the finite-precision privacy attacks."""


@attack.command("fixed-point")
@click.option("--n-exp", type=int, default=2, show_default=True,
              help="Noise scale exponent: the scale is 2**n_exp.")
@click.option("-d", "--frac-bits", type=int, default=6, show_default=True)
@click.option("--r1", type=float, default=0.0, show_default=True)
@click.option("--r2", type=float, default=1.0 + 2.0 ** -5,
              help="Second secret [default: 1 + 2**-5].")
@click.option("-n", "--grid-size", type=int, default=1 << 16, show_default=True)
@click.option("--output", "-o", "out_path", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Write per-value masses for both secrets (plot data).")
def attack_fixed_point(n_exp, frac_bits, r1, r2, grid_size, out_path, csv_path):
    """Low-bit fingerprint attack on power-of-two noise scaling."""
    report = attacks.fixedpoint_attack(n_exp, frac_bits, r1, r2, grid_size)
    _emit(report.to_json(), out_path)
    if csv_path:
        _write_mass_csv(report, csv_path)


@attack.command("step")
@click.option("--grid-size", "-n", type=int, default=1 << 8, show_default=True)
@click.option("--eps", type=float, default=math.log(4.0 / 3.0),
              help="Privacy level [default: ln(4/3)].")
@click.option("--delta-f", type=float, default=1.0, show_default=True)
@click.option("--r1", type=float, default=0.0, show_default=True)
@click.option("--r2", type=float, default=1.0, show_default=True)
@click.option("--cell-side", type=float, default=1.0, show_default=True)
@click.option("--origin", type=float, default=0.0, show_default=True)
@click.option("--center-window", type=float, default=None,
              help="Also summarize cells within this distance of the midpoint.")
@click.option("--output", "-o", "out_path", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def attack_step(grid_size, eps, delta_f, r1, r2, cell_side, origin,
                center_window, out_path, csv_path):
    """Per-cell ratio inflation caused by a quantized uniform source."""
    params = PrivacyParams(eps=eps, sensitivity=delta_f)
    grid = RoundingGrid((origin,), cell_side, 1)
    report = attacks.step_distribution_attack(grid_size, params, r1, r2, grid,
                                              center_window)
    _emit(report.to_json(), out_path)
    if csv_path:
        _write_mass_csv(report, csv_path)


def _write_mass_csv(report: attacks.AttackReport, path: str) -> None:
    rows = report.mass_rows()
    with open(path, "w", newline="") as fh:
        w = _csv.DictWriter(fh, fieldnames=["value", "mass_r1", "mass_r2"])
        w.writeheader()
        w.writerows(rows)


@main.command()
@_config_options
@click.option("--seed", type=int, default=None,
              help="Deterministic draw; OS entropy when omitted.")
@click.option("--answer", type=float, default=None,
              help="True answer to privatize [default: from config].")
def sample(config, overrides, out_path, seed, answer) -> None:
    """Draw one reported answer through the modelled generator."""
    try:
        cfg = _load_config(config, overrides)
        noise, params, region, grid = _mechanism_setup(cfg)
        model, _ = _model_setup(cfg)
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(CONFIG_EXIT)
    if answer is None:
        answer = _get_float(cfg, "mechanism", "answer", 0.0)
    rng = random.Random(seed) if seed is not None else random.SystemRandom()
    signed = _get_bool(cfg, "mechanism", "signed")
    remap = _get_bool(cfg, "mechanism", "remap")

    def draw() -> float:
        i = rng.randint(1, model.N)
        u = i / model.N
        return model.bias(u) if model.bias is not None else u

    source = draw() if noise != PLANAR else (draw(), draw())
    result = (answer, answer) if noise == PLANAR else answer
    reported = mechanisms.run_mechanism(result, noise, params, region, grid,
                                        source, signed=signed, remap=remap)
    _emit({"answer": result if noise != PLANAR else list(result),
           "draw": source if noise != PLANAR else list(source),
           "reported": reported.to_json(),
           "seed": seed}, out_path)


@main.command()
@click.argument("file1", type=click.Path(exists=True))
@click.argument("file2", type=click.Path(exists=True))
@click.option("--norm", "-p", type=float, default=2.0, show_default=True)
def wasserstein(file1, file2, norm) -> None:
    """Infinity-Wasserstein distance between two distribution CSV files."""
    try:
        mu = _read_distribution(file1)
        nu = _read_distribution(file2)
        d = wasserstein_inf(mu, nu, math.inf if norm == math.inf else norm)
    except (ValueError, distributions.ExceptionMassMismatchError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(CONFIG_EXIT)
    click.echo(_dump({"wasserstein_inf": d}), nl=False)


def _read_distribution(path: str) -> DiscreteDistribution:
    atoms = []
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        for row in reader:
            mass = Fraction(row["mass_exact"]) if row.get("mass_exact") \
                else Fraction(float(row["mass"]))
            if "location" in row and row["location"] not in (None, ""):
                loc = (EXCEPTION if row["location"] == "EXCEPTION"
                       else float(row["location"]))
            else:
                coords = []
                i = 0
                while f"x{i}" in row:
                    coords.append(float(row[f"x{i}"]))
                    i += 1
                loc = tuple(coords)
            atoms.append((loc, mass))
    return DiscreteDistribution(atoms)


@main.command()
@click.option("--data", type=click.Path(exists=True), required=True,
              help="CSV dataset, one record per line, with a header.")
@click.option("--predicate", type=str, default=None,
              help="Filter like 'age>=30' or 'city==paris'.")
@click.option("--output", "-o", "out_path", type=click.Path(), default=None)
def query(data, predicate, out_path) -> None:
    """Evaluate the toy counting query on a CSV dataset."""
    with open(data, newline="") as fh:
        records = list(_csv.DictReader(fh))
    try:
        pred = _parse_predicate(predicate) if predicate else None
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(CONFIG_EXIT)
    count = mechanisms.count_query_eval(records, pred)
    _emit({"query": "count", "predicate": predicate, "value": count,
           "delta_f": 1.0}, out_path)


_OPS = {
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


def _parse_predicate(expr: str):
    for op in ("<=", ">=", "==", "!=", "<", ">"):
        if op in expr:
            field, raw = expr.split(op, 1)
            field, raw = field.strip(), raw.strip()
            try:
                target = float(raw)
                numeric = True
            except ValueError:
                target, numeric = raw, False
            fn = _OPS[op]

            def pred(record, _f=field, _t=target, _n=numeric, _fn=fn):
                v = record.get(_f)
                if v is None:
                    return False
                if _n:
                    try:
                        return _fn(float(v), _t)
                    except ValueError:
                        return False
                return _fn(v, _t)

            return pred
    raise ValueError(f"cannot parse predicate {expr!r}")


if __name__ == "__main__":
    main()
