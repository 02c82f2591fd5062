"""Command-line interface.

Four subcommands, each driven by a JSON config document (schema shipped at
``nhmech/data/config.schema.json``):

  simulate        integrate the full constrained flow, write a trajectory CSV
  verify-hj       check a candidate one-form's three conditions at seeded
                  sample points, write a JSON report
  check-structure bracket-generating rank and multiplier-matrix SPD margin
                  at seeded sample points
  compare         integrate the reduced flow, lift it, and compare against
                  the full flow

Exit codes: 0 success / all checks passed, 1 run or check failure,
2 invalid input.  Sampling uses the counter-based Philox generator, so a
fixed config + seed reproduces output byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources

import jsonschema
import numpy as np

from .errors import NhmechError
from .hj import (
    OneFormCandidate,
    Tolerances,
    VerificationReport,
    add_structure_checks,
    run_condition_checks,
    sample_box,
    theorem_equivalence_check,
)
from .integrate import IntegratorConfig, integrate_phase
from .mechanics import MechanicalSystem, PhaseState, legendre
from .nonholo import ConstraintDistribution, NonholonomicSystem
from .systems import EXAMPLES, ExampleSpec, get_example

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_BADINPUT = 2


class ConfigError(Exception):
    pass


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    schema = json.loads(
        resources.files("nhmech").joinpath("data/config.schema.json").read_text()
    )
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config does not match schema: {exc.message}") from exc
    return cfg


def _build_inline_system(obj: dict) -> NonholonomicSystem:
    """Constant-coefficient custom system: diagonal metric, optional linear
    potential, constant constraint rows."""
    n = obj["dim"]
    diag = np.asarray(obj["metric_diag"], dtype=float)
    if diag.shape[0] != n:
        raise ConfigError("metric_diag length must equal dim")
    lin = np.asarray(obj.get("potential_linear", [0.0] * n), dtype=float)
    if lin.shape[0] != n:
        raise ConfigError("potential_linear length must equal dim")
    rows = np.asarray(obj.get("constraints", []), dtype=float).reshape(-1, n)
    g = np.diag(diag)
    mech = MechanicalSystem(
        dim=n,
        metric=lambda q: g,
        potential=lambda q: float(lin @ q),
        metric_deriv=lambda q: np.zeros((n, n, n)),
        potential_grad=lambda q: lin,
    )
    dist = ConstraintDistribution(
        k=rows.shape[0],
        A=lambda q: rows,
        A_deriv=lambda q: np.zeros((rows.shape[0], n, n)),
    )
    return NonholonomicSystem(mech=mech, dist=dist)


def _resolve_system(cfg: dict):
    """Returns (NonholonomicSystem, ExampleSpec or None)."""
    system = cfg["system"]
    if isinstance(system, dict):
        return _build_inline_system(system), None
    if system not in EXAMPLES:
        raise ConfigError(
            f"unknown system {system!r}; available: {sorted(EXAMPLES)} "
            "or an inline object"
        )
    kwargs = {}
    if system == "knife_edge" and "branch" in cfg:
        kwargs["branch"] = cfg["branch"]
    try:
        spec = get_example(system, cfg.get("params"), **kwargs)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec.system, spec


def _resolve_gamma(cfg: dict, spec: ExampleSpec | None) -> OneFormCandidate:
    if spec is None:
        raise ConfigError("this command needs a named example system (candidate family)")
    gp = dict(spec.default_gamma_params)
    gp.update(cfg.get("gamma_params", {}))
    try:
        return spec.make_gamma(**gp)
    except TypeError as exc:
        raise ConfigError(f"bad gamma_params for {spec.name}: {exc}") from exc
    except NhmechError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_initial(cfg: dict, sys: NonholonomicSystem,
                     spec: ExampleSpec | None) -> PhaseState:
    initial = cfg.get("initial")
    if initial is None:
        if spec is None:
            raise ConfigError("inline systems need an explicit 'initial' block")
        if cfg.get("gamma_params"):
            gamma = _resolve_gamma(cfg, spec)
            q0 = spec.default_ic.q
            return PhaseState(q=q0, p=gamma(q0))
        return spec.default_ic
    q = np.asarray(initial["q"], dtype=float)
    if q.shape[0] != sys.dim:
        raise ConfigError(f"initial q must have length {sys.dim}")
    if ("p" in initial) == ("v" in initial):
        raise ConfigError("initial needs exactly one of 'p' or 'v'")
    if "p" in initial:
        p = np.asarray(initial["p"], dtype=float)
    else:
        p = legendre(sys.mech, q, np.asarray(initial["v"], dtype=float))
    if p.shape[0] != sys.dim:
        raise ConfigError(f"initial momentum/velocity must have length {sys.dim}")
    return PhaseState(q=q, p=p)


def _resolve_integrator(cfg: dict) -> IntegratorConfig:
    try:
        return IntegratorConfig(**cfg.get("integrator", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad integrator config: {exc}") from exc


def _resolve_tolerances(cfg: dict) -> Tolerances:
    return Tolerances(**cfg.get("tolerances", {}))


def _resolve_t_span(cfg: dict):
    t_span = cfg.get("t_span", [0.0, 10.0])
    if t_span[1] < t_span[0]:
        raise ConfigError("t_span end must not precede its start")
    return float(t_span[0]), float(t_span[1])


def _rng(cfg: dict, seed_override) -> np.random.Generator:
    seed = int(cfg.get("seed", 0)) if seed_override is None else int(seed_override)
    return np.random.Generator(np.random.Philox(seed))


def _coord_names(sys: NonholonomicSystem, spec: ExampleSpec | None):
    if spec is not None:
        return spec.coord_names
    return tuple(f"q{i+1}" for i in range(sys.dim))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path, header, columns) -> None:
    lines = [",".join(header)]
    rows = len(columns[0])
    for i in range(rows):
        lines.append(",".join(_fmt(col[i]) for col in columns))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _out_path(cfg: dict, args) -> str | None:
    return args.output if args.output is not None else cfg.get("output")


def cmd_simulate(cfg: dict, args) -> int:
    nhsys, spec = _resolve_system(cfg)
    z0 = _resolve_initial(cfg, nhsys, spec)
    icfg = _resolve_integrator(cfg)
    t_span = _resolve_t_span(cfg)
    traj = integrate_phase(nhsys, z0, t_span, icfg)
    names = _coord_names(nhsys, spec)
    header = ["t", *names, *(f"p_{n}" for n in names), "energy",
              *(f"c_res_{s+1}" for s in range(nhsys.k))]
    columns = [traj.times]
    columns += [traj.states[:, i] for i in range(2 * nhsys.dim)]
    columns.append(traj.monitors["energy"])
    columns += [traj.monitors[f"c_res_{s+1}"] for s in range(nhsys.k)]
    _write_csv(_out_path(cfg, args), header, columns)
    e = traj.monitors["energy"]
    res_max = max(
        (float(np.max(np.abs(traj.monitors[f"c_res_{s+1}"]))) for s in range(nhsys.k)),
        default=0.0,
    )
    print(f"termination: {traj.termination}")
    print(f"final state: {np.array2string(traj.final_state, precision=12)}")
    print(f"max energy drift: {np.max(np.abs(e - e[0])):.3e}")
    print(f"max constraint residual: {res_max:.3e}")
    return EXIT_OK if traj.termination == "completed" else EXIT_FAIL


def _report_to_file(report: VerificationReport, path, extra: dict | None = None) -> None:
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_verify_hj(cfg: dict, args) -> int:
    nhsys, spec = _resolve_system(cfg)
    gamma = _resolve_gamma(cfg, spec)
    tols = _resolve_tolerances(cfg)
    rng = _rng(cfg, args.seed)
    points = sample_box(spec.domain_box, int(cfg.get("samples", 100)), rng)
    report = run_condition_checks(nhsys, gamma, points, tols)
    _report_to_file(report, _out_path(cfg, args),
                    extra={"system": spec.name, "gamma_params": gamma.params})
    ok = report.conditions_passed()
    for name in ("membership", "dgamma", "hj_spread"):
        v = report.verdicts[name]
        print(f"{name}: {'pass' if v['pass'] else 'FAIL'} "
              f"(value {v['value']:.3e}, tol {v['tol']:.1e})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_check_structure(cfg: dict, args) -> int:
    nhsys, spec = _resolve_system(cfg)
    tols = _resolve_tolerances(cfg)
    rng = _rng(cfg, args.seed)
    count = int(cfg.get("structure_samples", cfg.get("samples", 20)))
    if spec is not None:
        points = sample_box(spec.domain_box, count, rng)
    else:
        points = rng.uniform(-1.0, 1.0, size=(count, nhsys.dim))
    report = VerificationReport(
        sample_points=points,
        m_residual_max=float("nan"),
        dgamma_residual_max=float("nan"),
        hj_energy_values=np.zeros(0),
        energy_spread=float("nan"),
    )
    add_structure_checks(nhsys, points, report, tols,
                         max_depth=int(cfg.get("max_depth", 3)))
    doc = {
        "system": spec.name if spec is not None else "inline",
        "bracket_rank": report.bracket_rank,
        "bracket_depth": report.bracket_depth,
        "bracket_full": report.bracket_full,
        "regularity_min_eig": report.regularity_min_eig,
        "verdicts": report.verdicts,
        "samples": count,
    }
    text = json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n"
    out = _out_path(cfg, args)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
    rank_v = report.verdicts["bracket_rank"]
    reg_v = report.verdicts["regularity"]
    print(f"bracket rank: {rank_v['value']}/{rank_v['required']} at depth "
          f"{rank_v['depth']} -> {'pass' if rank_v['pass'] else 'FAIL'}")
    print(f"regularity min eigenvalue: {reg_v['value']} -> "
          f"{'pass' if reg_v['pass'] else 'FAIL'}")
    return EXIT_OK if report.structure_passed() else EXIT_FAIL


def cmd_compare(cfg: dict, args) -> int:
    nhsys, spec = _resolve_system(cfg)
    gamma = _resolve_gamma(cfg, spec)
    icfg = _resolve_integrator(cfg)
    t_span = _resolve_t_span(cfg)
    initial = cfg.get("initial")
    q0 = (np.asarray(initial["q"], dtype=float) if initial is not None
          else spec.default_ic.q)
    gap_tol = float(cfg.get("gap_tol", 1e-6))
    result = theorem_equivalence_check(nhsys, gamma, q0, t_span, icfg)
    names = _coord_names(nhsys, spec)
    header = ["t"]
    header += [f"red_{n}" for n in names] + [f"red_p_{n}" for n in names]
    header += [f"full_{n}" for n in names] + [f"full_p_{n}" for n in names]
    header += ["gap"]
    m = result.times.shape[0]
    columns = [result.times]
    columns += [result.lifted[:, i] for i in range(2 * nhsys.dim)]
    columns += [result.full.states[:m, i] for i in range(2 * nhsys.dim)]
    columns.append(result.gap)
    _write_csv(_out_path(cfg, args), header, columns)
    print(f"max phase-space gap: {result.max_gap:.6e} (tol {gap_tol:.1e})")
    if result.truncated:
        print(f"truncated run: reduced={result.reduced.termination}, "
              f"full={result.full.termination}")
        return EXIT_FAIL
    return EXIT_OK if result.max_gap <= gap_tol else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nhmech",
        description="Constrained mechanical flows and candidate one-form checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("simulate", cmd_simulate),
        ("verify-hj", cmd_verify_hj),
        ("check-structure", cmd_check_structure),
        ("compare", cmd_compare),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--output", default=None, help="output file (default: config's)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BADINPUT
    except NhmechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
