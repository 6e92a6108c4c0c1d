"""Experiment runner: flat-file configs, subcommands, CSV and manifest output.

Configuration is a flat key = value document (# starts a comment); every
key has a default, unknown keys are rejected by name, and --set overrides
win over the file.  Each run writes results.csv with the fixed column
schema and a manifest.json carrying the fully resolved configuration,
both atomically (tmp file + rename).  Identical invocations produce
byte-identical CSVs; only the manifest timestamp differs.

Exit codes: 0 success, 1 invariant failure, 2 configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, kernels
from .action import PotentialSpec
from .exact_diag import DiscretizationSpec, InvariantViolation, sector_ground
from .estimator import RunConfig, energy_estimate, ordering_check, sweep_alpha
from .geometry import SpinSector
from .kernels import CutoffSpec, ModelParams
from .paths import TimeGrid
from .validate import run_validation

CSV_COLUMNS = ("alpha", "beta", "epsilon", "N", "p", "M", "S",
               "estimator_variant", "value", "stderr", "n_paths", "n_steps",
               "seed")


class ConfigError(Exception):
    pass


def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _str(text):
    return str(text)


def _float_list(text):
    items = [t for t in str(text).split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(t) for t in items)


def _opt_float(text):
    text = str(text).strip()
    if text in ("", "none"):
        return None
    return float(text)


# key -> (parser, default as config text)
SCHEMA = {
    "alpha": (_float, "0.0"),
    "N": (_int, "1"),
    "p": (_int, "1"),
    "L": (_float, "1.0"),
    "beta": (_float, "2.0"),
    "n_steps": (_int, "256"),
    "epsilon": (_float, "0.5"),
    "n_paths": (_int, "20000"),
    "seed": (_int, "1"),
    "workers": (_int, "1"),
    "variant": (_str, "ratio"),
    "delta": (_opt_float, ""),
    "alphas": (_float_list, "0,0.5,1"),
    "eps_ladder": (_float_list, "0.5,0.25,0.125,0.0625"),
    "n_el_basis": (_int, "10"),
    "k_max": (_int, "3"),
    "n_ph_max": (_int, "3"),
    "cutoff_k_max": (_int, "0"),
    "v_quadratic": (_float, "0.0"),
    "w_quadratic": (_float, "0.0"),
    "u_lower_bound": (_float, "0.0"),
    "mc_csv": (_str, ""),
    "diag_csv": (_str, ""),
    "out": (_str, "."),
}

REQUIRED = {"compare": ("mc_csv", "diag_csv")}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved flat configuration: defaults < config file < --set < flags."""

    values: dict

    @classmethod
    def resolve(cls, config_path, set_items, flag_overrides):
        text = {key: default for key, (_, default) in SCHEMA.items()}
        if config_path is not None:
            text.update(_parse_config_file(config_path))
        for item in set_items or ():
            key, _, value = item.partition("=")
            if not _:
                raise ConfigError(f"--set needs key=value, got {item!r}")
            key = key.strip()
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key: {key!r}")
            text[key] = value.strip()
        for key, value in flag_overrides.items():
            if value is not None:
                text[key] = str(value)
        values = {}
        for key, raw in text.items():
            parser = SCHEMA[key][0]
            try:
                values[key] = parser(raw)
            except ValueError as err:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({err})")
        return cls(values)

    def require(self, subcommand):
        for key in REQUIRED.get(subcommand, ()):
            if not self.values[key]:
                raise ConfigError(f"{subcommand} requires config key {key!r}")

    def as_text(self) -> dict:
        """Canonical string form of every key, for the manifest."""
        out = {}
        for key in sorted(SCHEMA):
            v = self.values[key]
            if isinstance(v, tuple):
                out[key] = ",".join(_fmt(x) for x in v)
            elif v is None:
                out[key] = ""
            elif isinstance(v, float):
                out[key] = _fmt(v)
            else:
                out[key] = str(v)
        return out

    def potential(self) -> PotentialSpec | None:
        v2, w2 = self.values["v_quadratic"], self.values["w_quadratic"]
        if v2 == 0.0 and w2 == 0.0:
            return None
        return PotentialSpec(
            V=(lambda x, c=v2: c * x**2) if v2 != 0.0 else None,
            W=(lambda r, c=w2: c * r**2) if w2 != 0.0 else None,
            u_lower_bound=self.values["u_lower_bound"])

    def run_config(self) -> RunConfig:
        v = self.values
        cutoff = None
        if v["cutoff_k_max"] > 0:
            cutoff = CutoffSpec(epsilon=v["epsilon"], k_max=v["cutoff_k_max"])
        try:
            return RunConfig(
                params=ModelParams(alpha=v["alpha"], N=v["N"], L=v["L"],
                                   beta=v["beta"]),
                sector=SpinSector(v["N"], v["p"]),
                grid=TimeGrid(v["beta"], v["n_steps"]),
                eps=v["epsilon"], n_paths=v["n_paths"], seed=v["seed"],
                n_workers=v["workers"], variant=v["variant"],
                delta=v["delta"], pot=self.potential(), cutoff=cutoff)
        except ValueError as err:
            raise ConfigError(str(err))

    def disc_spec(self) -> DiscretizationSpec:
        v = self.values
        try:
            return DiscretizationSpec(n_el_basis=v["n_el_basis"],
                                      k_max=v["k_max"],
                                      n_ph_max=v["n_ph_max"],
                                      epsilon=v["epsilon"])
        except ValueError as err:
            raise ConfigError(str(err))

    @property
    def out_dir(self) -> Path:
        return Path(self.values["out"])


def _parse_config_file(path) -> dict:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError:
        raise
    text = {}
    for lineno, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown config key: {key!r}")
        text[key] = value.strip()
    return text


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _estimate_row(est) -> list:
    cfg = est.config
    m = float(cfg.sector.M)
    return [_fmt(cfg.params.alpha), _fmt(cfg.params.beta), _fmt(cfg.eps),
            str(cfg.params.N), str(cfg.sector.p), _fmt(m), _fmt(abs(m)),
            cfg.variant, _fmt(est.value), _fmt(est.stderr),
            str(cfg.n_paths), str(cfg.grid.n_steps), str(cfg.seed)]


def _write_csv(path: Path, rows, columns=CSV_COLUMNS):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    os.replace(tmp, path)


def _write_manifest(path: Path, subcommand, config: ExperimentConfig,
                    t0: float, extras: dict):
    doc = {"command": subcommand,
           "config": config.as_text(),
           "master_seed": config.values["seed"],
           "version": __version__,
           "wall_clock_seconds": round(time.monotonic() - t0, 3),
           "timestamp": datetime.now(timezone.utc).isoformat()}
    doc.update(extras)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def cmd_energy(config: ExperimentConfig, t0: float) -> int:
    est = energy_estimate(config.run_config())
    _write_csv(config.out_dir / "results.csv", [_estimate_row(est)])
    _write_manifest(config.out_dir / "manifest.json", "energy", config, t0,
                    {"n_effective": est.n_effective,
                     "diagnostics": est.diagnostics})
    return 0


def cmd_sweep_alpha(config: ExperimentConfig, t0: float) -> int:
    report = sweep_alpha(config.run_config(), config.values["alphas"])
    rows = [_estimate_row(est) for est in report["estimates"]]
    _write_csv(config.out_dir / "results.csv", rows)
    _write_manifest(config.out_dir / "manifest.json", "sweep-alpha", config,
                    t0, {"paired_differences": report["paired_differences"]})
    return 0


def cmd_uv_limit(config: ExperimentConfig, t0: float) -> int:
    base = config.run_config()
    rows = []
    for eps in config.values["eps_ladder"]:
        est = energy_estimate(replace(base, eps=float(eps)))
        rows.append(_estimate_row(est))
    _write_csv(config.out_dir / "results.csv", rows)
    _write_manifest(config.out_dir / "manifest.json", "uv-limit", config, t0,
                    {"eps_ladder": list(config.values["eps_ladder"]),
                     "common_random_numbers": True})
    return 0


def cmd_ordering(config: ExperimentConfig, t0: float) -> int:
    report = ordering_check(config.run_config())
    rows = [_estimate_row(report["symmetric"]),
            _estimate_row(report["antisymmetric"])]
    _write_csv(config.out_dir / "results.csv", rows)
    _write_manifest(config.out_dir / "manifest.json", "ordering", config, t0,
                    {"difference": report["difference"],
                     "combined_sigma": report["combined_sigma"],
                     "survival_fractions": {
                         str(k): v
                         for k, v in report["survival_fractions"].items()}})
    return 0


def cmd_diag(config: ExperimentConfig, t0: float) -> int:
    v = config.values
    if v["N"] == 1:
        symmetry = "none"
    elif v["N"] == 2:
        symmetry = "symmetric" if v["p"] == 1 else "antisymmetric"
    else:
        raise ConfigError(f"diag supports N in 1..2, got N = {v['N']}")
    params = ModelParams(alpha=v["alpha"], N=v["N"], L=v["L"], beta=v["beta"])
    res = sector_ground(v["N"], symmetry, config.potential(), params,
                        config.disc_spec())
    sector = SpinSector(v["N"], v["p"])
    m = float(sector.M)
    row = [_fmt(v["alpha"]), _fmt(v["beta"]), _fmt(v["epsilon"]),
           str(v["N"]), str(v["p"]), _fmt(m), _fmt(abs(m)), "exact-diag",
           _fmt(res.ground_energy), _fmt(0.0), "0", "0", str(v["seed"])]
    _write_csv(config.out_dir / "results.csv", [row])
    _write_manifest(config.out_dir / "manifest.json", "diag", config, t0,
                    {"gap": res.gap, "provenance": res.provenance})
    return 0


def _read_rows(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _join_key(row) -> tuple:
    return tuple(_fmt(row[k]) for k in ("alpha", "beta", "epsilon")) + (
        str(int(row["N"])), str(int(row["p"])))


def cmd_compare(config: ExperimentConfig, t0: float) -> int:
    config.require("compare")
    mc_rows = _read_rows(config.values["mc_csv"])
    diag_rows = {_join_key(r): r for r in _read_rows(config.values["diag_csv"])}
    out_rows = []
    for row in mc_rows:
        ref = diag_rows.get(_join_key(row))
        if ref is None:
            continue
        value, stderr = float(row["value"]), float(row["stderr"])
        target = float(ref["value"])
        sigma = abs(value - target) / stderr if stderr > 0 else float("inf")
        out_rows.append([row["alpha"], row["beta"], row["epsilon"], row["N"],
                         row["p"], _fmt(value), _fmt(stderr), _fmt(target),
                         _fmt(sigma)])
    if not out_rows:
        raise ConfigError("no rows with matching (alpha, beta, epsilon, N, p)"
                          " between the two CSVs")
    columns = ("alpha", "beta", "epsilon", "N", "p", "mc_value", "mc_stderr",
               "diag_value", "sigma_distance")
    _write_csv(config.out_dir / "compare.csv", out_rows, columns)
    sigmas = [float(r[-1]) for r in out_rows]
    _write_manifest(config.out_dir / "manifest.json", "compare", config, t0,
                    {"n_rows": len(out_rows),
                     "max_sigma_distance": max(sigmas)})
    return 0


def cmd_validate(config: ExperimentConfig, t0: float) -> int:
    report = run_validation(n_workers=config.values["workers"])
    print(json.dumps(report, indent=2))
    _write_manifest(config.out_dir / "manifest.json", "validate", config, t0,
                    {"passed": report["passed"], "suites": report["suites"]})
    if not report["passed"]:
        failed = [s["suite"] for s in report["suites"]
                  if s["status"] != "pass"]
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


COMMANDS = {
    "energy": cmd_energy,
    "sweep-alpha": cmd_sweep_alpha,
    "uv-limit": cmd_uv_limit,
    "ordering": cmd_ordering,
    "diag": cmd_diag,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polaron1d",
        description="Path-integral Monte Carlo and exact diagonalization "
                    "for the 1-D Froehlich polaron with spin sectors.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="flat key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (default .)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--inject-fault", type=float, default=None,
                       help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.inject_fault is not None:
        kernels._SERIES_COEFF_SCALE = args.inject_fault
    t0 = time.monotonic()
    try:
        config = ExperimentConfig.resolve(
            args.config, args.set,
            {"out": args.out, "seed": args.seed, "workers": args.workers})
        config.require(args.subcommand)
        out_dir = config.out_dir
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise OSError(f"cannot create output directory {out_dir}: {err}")
        return COMMANDS[args.subcommand](config, t0)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except InvariantViolation as err:
        print(f"invariant failure: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
