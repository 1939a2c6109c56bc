"""Command-line interface.

    covertsec [global flags] analyze CONFIG [SCENARIO ...]
    covertsec [global flags] attack CONFIG SCENARIO
    covertsec [global flags] design CONFIG [-o SCHEME]
    covertsec [global flags] defend CONFIG [--scheme SCHEME] [--allow-uncertified]
    covertsec [global flags] export-fixture NAME [-o PATH]

CONFIG is a scenario file or the name of a built-in fixture; ``--random N M
P SEED`` replaces it with a generated plant. Exit codes: 0 done, 2 invalid
input, 3 numerical failure, 4 design budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .attacks import (
    AttackKind,
    AttackSignalPlan,
    check_covert_feasibility,
    synthesize_covert_attack,
    synthesize_designed_attack,
)
from .coding import (
    DESIGN_BUDGET,
    check_theorem2,
    design_decoder,
    verify_inverse,
)
from .config import ConfigError, ScenarioFile, load, load_scheme, parse_scenario_file, save_scheme
from .errors import CovertSecError, FeasibilityError, NoDesignedAttackError, ValidationError
from .fixtures import FIXTURES, fixture, random_fixture
from .simulation import compare_traces, max_state_deviation, simulate


class UncertifiedSchemeError(ValidationError):
    """Scheme failed verification and the caller did not accept that."""


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(repr(part.shape).encode())
            h.update(np.ascontiguousarray(part, dtype=np.float64).tobytes())
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
        h.update(b"|")
    return h.hexdigest()[:16]


class Recorder:
    """Collects operation calls with hashes of their inputs for the report."""

    def __init__(self):
        self.calls = []

    def record(self, op: str, inputs: dict, result) -> None:
        hashed = {k: _digest(*v) if isinstance(v, tuple) else _digest(v) for k, v in inputs.items()}
        self.calls.append({"op": op, "inputs": hashed, "result": result})


def _system_key(sf: ScenarioFile) -> tuple:
    return (sf.system.A, sf.system.B, sf.system.C)


def _scenario_key(s) -> list:
    return [s.m, s.p, list(s.compromised_inputs), list(s.compromised_outputs)]


def _set(items) -> str:
    return "{" + ",".join(str(i) for i in items) + "}"


# --- argument handling -------------------------------------------------------


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=default, help="noise and design seed (overrides the file)")
    g.add_argument("--horizon", type=int, default=default, help="simulation horizon in steps")
    g.add_argument("--tolerance", type=float, default=default, help="trace divergence threshold (default 1e-9)")
    g.add_argument("--output-dir", type=Path, default=default, help="directory for traces and reports")


def _config_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("config", nargs=None if required else "?", help="scenario file or fixture name")
    parser.add_argument(
        "--random", nargs=4, type=int, metavar=("N", "M", "P", "SEED"),
        help="use a generated random plant instead of CONFIG",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covertsec", description="Covert-attack analysis and input-coding defense.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="feasibility verdicts and relative degrees")
    _config_args(p, required=False)
    p.add_argument("scenarios", nargs="*", help="scenario names (default: all)")
    _global_flags(p, suppress=True)

    p = sub.add_parser("attack", help="simulate a covert attack against its baseline")
    _config_args(p, required=False)
    p.add_argument("scenario", help="scenario name")
    _global_flags(p, suppress=True)

    p = sub.add_parser("design", help="search for a certified decoder")
    _config_args(p, required=False)
    p.add_argument("-o", "--output", type=Path, help="scheme file to write")
    p.add_argument("--structure", choices=("unit-output", "negated"), default="unit-output")
    p.add_argument("--budget", type=int, default=DESIGN_BUDGET, help="maximum candidate draws")
    _global_flags(p, suppress=True)

    p = sub.add_parser("defend", help="replay the threat attack with and without coding")
    _config_args(p, required=False)
    p.add_argument("--scheme", type=Path, help="scheme file (default: the file's scheme block)")
    p.add_argument("--allow-uncertified", action="store_true", help="run even if the scheme fails verification")
    _global_flags(p, suppress=True)

    p = sub.add_parser("export-fixture", help="write a built-in fixture as a scenario file")
    p.add_argument("name", nargs="?", choices=sorted(FIXTURES), help="fixture name")
    p.add_argument("--random", nargs=4, type=int, metavar=("N", "M", "P", "SEED"))
    p.add_argument("-o", "--output", type=Path, help="file to write (default: stdout or OUTPUT_DIR/NAME.json)")
    _global_flags(p, suppress=True)
    return parser


def _resolve(args) -> ScenarioFile:
    if getattr(args, "random", None):
        return parse_scenario_file(random_fixture(*args.random))
    if not args.config:
        raise ConfigError("a scenario file, fixture name or --random is required")
    path = Path(args.config)
    if path.exists():
        return load(path)
    if args.config in FIXTURES:
        return parse_scenario_file(fixture(args.config))
    raise ConfigError(f"{args.config!r} is neither a readable file nor a fixture ({', '.join(sorted(FIXTURES))})")


def _sim_config(sf: ScenarioFile, args):
    cfg = sf.simulation
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _outdir(args) -> Path:
    out = args.output_dir if args.output_dir is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, float) and v == float("inf"):
        return "inf"
    return str(v)


def _degrees(profile) -> list:
    return ["inf" if r == float("inf") else int(r) for r in profile.per_output]


def write_plot_data(path: Path, runs: dict) -> Path:
    """Long-format CSV: one ``run,k,signal,value`` row per sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "k", "signal", "value"])
        for label, trace in runs.items():
            names = trace.columns()[1:]
            table = trace.table()
            for row in table:
                k = str(int(row[0]))
                for name, v in zip(names, row[1:]):
                    writer.writerow([label, k, name, format(v, ".17g")])
    return path


# --- commands ----------------------------------------------------------------


def cmd_analyze(sf: ScenarioFile, names, args, out=None) -> dict:
    out = sys.stdout if out is None else out
    rec = Recorder()
    names = list(names) or list(sf.scenarios)
    rows = []
    print(f"system {sf.name}: n={sf.system.n}, m={sf.system.m}, p={sf.system.p}", file=out)
    for name in names:
        scen = sf.scenario(name)
        rep = check_covert_feasibility(sf.system, scen)
        result = {
            "scenario": name,
            "inputs": list(scen.compromised_inputs),
            "outputs": list(scen.compromised_outputs),
            "relative_degrees": _degrees(rep.per_output_relative_degrees),
            "feasible_arbitrary": rep.feasible_arbitrary,
            "feasible_designed": rep.feasible_designed,
            "witness_output": rep.witness_output,
            "required_sensors": list(rep.required_sensors),
            "verdict": rep.verdict,
        }
        rec.record("check_covert_feasibility", {"system": _system_key(sf), "scenario": _scenario_key(scen)}, result)
        rows.append(result)
        print(f"\nscenario {name} ({scen.describe()})", file=out)
        print(f"  relative degrees per output: {rep.per_output_relative_degrees}", file=out)
        if rep.feasible_arbitrary:
            print("  covert: FEASIBLE (arbitrary)", file=out)
        else:
            print(
                f"  covert: INFEASIBLE; witness output {rep.witness_output}; "
                f"required sensors {_set(rep.required_sensors)}",
                file=out,
            )
            designed = "FEASIBLE" if rep.feasible_designed else "INFEASIBLE"
            print(f"  arbitrary: INFEASIBLE; designed: {designed}", file=out)

    report = {"fixture": sf.name, "scenarios": rows}
    if sf.defense is not None and sf.scheme is not None:
        res = check_theorem2(sf.system, sf.scheme, sf.defense, tol=sf.theorem2_tolerance)
        table = dataclasses.asdict(res) | {"verdict": res.verdict}
        rec.record(
            "check_theorem2",
            {"system": _system_key(sf), "scheme": sf.scheme.matrices(), "defense": [sf.defense.secure_input, list(sf.defense.secure_outputs), _scenario_key(sf.defense.threat)]},
            table,
        )
        report["theorem2"] = table
        print(f"\nscheme '{sf.scheme.label}' against threat {sf.defense.threat.describe()}:", file=out)
        print("  " + res.table().replace("\n", "\n  "), file=out)
    report["operations"] = rec.calls
    if args.output_dir is not None:
        path = _write_json(_outdir(args) / "analysis.json", report)
        report["files"] = [str(path)]
    return report


def _threat_plan(sf: ScenarioFile, scen, horizon: int, rec: Recorder) -> AttackSignalPlan:
    rep = check_covert_feasibility(sf.system, scen)
    if rep.feasible_arbitrary:
        a_u = sf.attack_signal.generate(horizon, scen.m_a)
        plan = synthesize_covert_attack(sf.system, scen, a_u, horizon)
    elif rep.feasible_designed:
        plan = synthesize_designed_attack(sf.system, scen, N=horizon)
    else:
        # No covert attack exists; replay the configured signal without a mask.
        a_u = sf.attack_signal.generate(horizon, scen.m_a)
        plan = AttackSignalPlan(horizon, a_u, np.zeros((horizon, scen.p_a)), AttackKind.UNMASKED, scen, rep.per_output_relative_degrees.minimum)
    rec.record(
        f"plan:{plan.kind.value}",
        {"system": _system_key(sf), "scenario": _scenario_key(scen), "horizon": horizon},
        {"actuator": _digest(plan.actuator_signal), "sensor": _digest(plan.sensor_signal)},
    )
    return plan


def _comparison(a, b, outputs, tol) -> dict:
    cmp = compare_traces(a, b, outputs, tol)
    scale = 1.0 + float(np.max(np.abs(b.y))) if b.y.size else 1.0
    return {
        "max_output_deviation": {str(q): v for q, v in cmp.max_deviation.items()},
        "first_divergence": {str(q): v for q, v in cmp.first_divergence.items()},
        "relative_output_deviation": cmp.worst / scale,
        "max_state_deviation": max_state_deviation(a, b),
        "tolerance": tol,
    }


def cmd_attack(sf: ScenarioFile, name: str, args, out=None) -> dict:
    out = sys.stdout if out is None else out
    rec = Recorder()
    scen = sf.scenario(name)
    cfg = _sim_config(sf, args)
    tol = 1e-9 if args.tolerance is None else args.tolerance
    rep = check_covert_feasibility(sf.system, scen)
    rec.record("check_covert_feasibility", {"system": _system_key(sf), "scenario": _scenario_key(scen)}, rep.verdict)
    span = cfg.horizon - cfg.attack_onset
    if span < 1:
        raise ValidationError("attack onset must fall inside the horizon")
    if rep.feasible_arbitrary:
        a_u = sf.attack_signal.generate(span, scen.m_a)
        plan = synthesize_covert_attack(sf.system, scen, a_u, span)
    elif rep.feasible_designed:
        plan = synthesize_designed_attack(sf.system, scen, N=span)
    else:
        raise FeasibilityError(
            f"no covert attack on {scen.describe()}: output {rep.witness_output} sees the attack but is not "
            f"compromised (required sensors {_set(rep.required_sensors)}), and the clean outputs are left-invertible",
            witness_output=rep.witness_output,
        )
    rec.record(
        f"synthesize:{plan.kind.value}",
        {"system": _system_key(sf), "scenario": _scenario_key(scen), "config": cfg.to_dict()},
        {"actuator": _digest(plan.actuator_signal), "sensor": _digest(plan.sensor_signal)},
    )

    baseline = simulate(sf.system, scen, None, None, cfg)
    attacked = simulate(sf.system, scen, plan, None, cfg)
    summary = _comparison(attacked, baseline, None, tol)
    rec.record("compare_traces", {"baseline": baseline.y, "attacked": attacked.y}, summary)

    outdir = _outdir(args)
    files = [
        str(baseline.to_csv(outdir / f"{name}-baseline.csv")),
        str(attacked.to_csv(outdir / f"{name}-attacked.csv")),
        str(write_plot_data(outdir / f"{name}-plot.csv", {"baseline": baseline, "attacked": attacked})),
    ]
    report = {
        "scenario": name,
        "attack": plan.kind.value,
        "verdict": rep.verdict,
        "relative_degree": "inf" if plan.relative_degree == float("inf") else int(plan.relative_degree),
        "comparison": summary,
        "operations": rec.calls,
        "files": files,
    }
    files.append(str(_write_json(outdir / f"{name}-report.json", report)))

    print(f"scenario {name} ({scen.describe()}): {plan.kind.value} covert attack, horizon {cfg.horizon}", file=out)
    print(f"  max output deviation from baseline: {max(summary['max_output_deviation'].values()):.3e}"
          f" (relative {summary['relative_output_deviation']:.3e})", file=out)
    print(f"  max state deviation from baseline:  {summary['max_state_deviation']:.3e}", file=out)
    for f in files:
        print(f"  wrote {f}", file=out)
    return report


def cmd_design(sf: ScenarioFile, args, out=None) -> dict:
    out = sys.stdout if out is None else out
    if sf.defense is None:
        raise ConfigError("the scenario file has no defense block", "defense")
    seed = 0 if args.seed is None else args.seed
    scheme = design_decoder(sf.system, sf.defense, seed=seed, budget=args.budget, structure=args.structure)
    res = check_theorem2(sf.system, scheme, sf.defense)
    inv = verify_inverse(scheme, horizon=200, trials=10, seed=seed)
    radii = scheme.spectral_radii()
    print(res.table(), file=out)
    print(f"spectral radius A_e = {radii['encoder']:.6g}, A_d = {radii['decoder']:.6g}", file=out)
    print(f"inverse check (200 steps x 10): max |u_d - u| = {inv.max_error:.3e} ({'PASS' if inv else 'FAIL'})", file=out)
    if args.output is not None:
        target = args.output
    else:
        target = _outdir(args) / "scheme.json"
    save_scheme(scheme, target)
    print(f"wrote {target}", file=out)
    return {"theorem2": dataclasses.asdict(res), "spectral_radii": radii, "inverse": dataclasses.asdict(inv), "file": str(target)}


def _certify(sf: ScenarioFile, scheme, horizon: int, seed: int, rec: Recorder) -> dict:
    res = check_theorem2(sf.system, scheme, sf.defense, tol=sf.theorem2_tolerance)
    inv = verify_inverse(scheme, horizon=horizon, trials=3, seed=seed)
    checks = {"theorem2": dataclasses.asdict(res) | {"verdict": res.verdict}, "inverse_float": dataclasses.asdict(inv)}
    ok_inverse = inv.passed
    if not ok_inverse and scheme.exact is not None:
        exact = verify_inverse(scheme, horizon=horizon, trials=3, seed=seed, arithmetic="exact")
        checks["inverse_exact"] = dataclasses.asdict(exact)
        ok_inverse = exact.passed
    checks["certified"] = bool(res.verdict and ok_inverse)
    checks["failures"] = [f"theorem 2 condition {c}" for c in res.failing()] + ([] if ok_inverse else ["inverse"])
    rec.record("certify", {"system": _system_key(sf), "scheme": scheme.matrices()}, checks["certified"])
    return checks


def cmd_defend(sf: ScenarioFile, args, out=None) -> dict:
    out = sys.stdout if out is None else out
    if sf.defense is None:
        raise ConfigError("the scenario file has no defense block", "defense")
    scheme = load_scheme(args.scheme) if args.scheme is not None else sf.scheme
    if scheme is None:
        raise ConfigError("no scheme: pass --scheme or add a scheme block", "scheme")
    rec = Recorder()
    cfg = _sim_config(sf, args)
    tol = 1e-9 if args.tolerance is None else args.tolerance
    checks = _certify(sf, scheme, cfg.horizon, cfg.seed, rec)
    print(f"scheme '{scheme.label}': " + ("certified" if checks["certified"] else "NOT certified (" + ", ".join(checks["failures"]) + ")"), file=out)
    if not checks["certified"] and not args.allow_uncertified:
        raise UncertifiedSchemeError(
            "scheme failed verification: " + ", ".join(checks["failures"]) + "; rerun with --allow-uncertified to simulate anyway"
        )

    threat = sf.defense.threat
    span = cfg.horizon - cfg.attack_onset
    if span < 1:
        raise ValidationError("attack onset must fall inside the horizon")
    plan = _threat_plan(sf, threat, span, rec)
    runs = {
        "baseline-plain": simulate(sf.system, threat, None, None, cfg),
        "attacked-plain": simulate(sf.system, threat, plan, None, cfg),
        "baseline-coded": simulate(sf.system, threat, None, scheme, cfg),
        "attacked-coded": simulate(sf.system, threat, plan, scheme, cfg),
    }
    informed = None
    try:
        informed = synthesize_designed_attack(sf.system, threat, N=span, scheme=scheme, require_designed=False)
    except NoDesignedAttackError as exc:
        print(f"  no decoder-aware attack found: {exc}", file=out)
    if informed is not None:
        runs["attacked-informed"] = simulate(sf.system, threat, informed, scheme, cfg)

    secured = list(sf.defense.secure_outputs)
    plain = _comparison(runs["attacked-plain"], runs["baseline-plain"], None, tol)
    coded = _comparison(runs["attacked-coded"], runs["baseline-coded"], secured, tol)
    base = runs["baseline-coded"]
    channel_error = float(np.max(np.abs(base.u_d - base.u))) if base.u.size else 0.0
    r_d = checks["theorem2"]["r_d"]
    summary = {
        "attack": plan.kind.value,
        "secured_outputs": secured,
        "r_d": r_d,
        "expected_first_divergence": cfg.attack_onset + r_d,
        "without_coding": plain,
        "with_coding": coded,
        "attack_free_channel_error": channel_error,
        "certification": checks,
    }
    if informed is not None:
        summary["decoder_aware"] = _comparison(runs["attacked-informed"], runs["baseline-coded"], secured, tol)
    rec.record("compare_traces", {k: v.y for k, v in runs.items()}, {"plain": plain["first_divergence"], "coded": coded["first_divergence"]})

    outdir = _outdir(args)
    files = [str(t.to_csv(outdir / f"defend-{label}.csv")) for label, t in runs.items()]
    files.append(str(write_plot_data(outdir / "defend-plot.csv", runs)))
    summary["operations"] = rec.calls
    summary["files"] = files
    files.append(str(_write_json(outdir / "defend-report.json", summary)))

    first = {int(q): k for q, k in coded["first_divergence"].items()}
    print(f"threat {threat.describe()}, {plan.kind.value} attack, onset {cfg.attack_onset}, r_d = {r_d}", file=out)
    print(f"  without coding: max output deviation {max(plain['max_output_deviation'].values()):.3e}", file=out)
    print(f"  with coding:    first divergence on secured outputs {first}; "
          f"max deviation {max(coded['max_output_deviation'].values()):.3e}", file=out)
    if informed is not None:
        dev = max(summary["decoder_aware"]["max_output_deviation"].values())
        print(f"  decoder-aware attack: max secured-output deviation {dev:.3e}", file=out)
    print(f"  attack-free channel: max |u_d - u| = {channel_error:.3e}", file=out)
    for f in files:
        print(f"  wrote {f}", file=out)
    return summary


def cmd_export(args, out=None) -> Optional[Path]:
    out = sys.stdout if out is None else out
    if args.random:
        data = random_fixture(*args.random)
    elif args.name:
        data = fixture(args.name)
    else:
        raise ConfigError("give a fixture name or --random N M P SEED")
    parse_scenario_file(data)  # exported files must load back
    text = json.dumps(data, indent=2) + "\n"
    if args.output is not None:
        target = args.output
    elif args.output_dir is not None:
        target = _outdir(args) / f"{data['name']}.json"
    else:
        out.write(text)
        return None
    target.write_text(text)
    print(f"wrote {target}", file=out)
    return target


def run(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    for key in ("seed", "horizon", "tolerance", "output_dir"):
        if not hasattr(args, key):
            setattr(args, key, None)
    if args.command == "export-fixture":
        return cmd_export(args, out)
    sf = _resolve(args)
    if args.command == "analyze":
        return cmd_analyze(sf, args.scenarios, args, out)
    if args.command == "attack":
        return cmd_attack(sf, args.scenario, args, out)
    if args.command == "design":
        return cmd_design(sf, args, out)
    return cmd_defend(sf, args, out)


def main(argv=None) -> int:
    try:
        run(argv)
    except CovertSecError as exc:
        print(f"covertsec: error: {exc}", file=sys.stderr)
        blocking = getattr(exc, "blocking_condition", None)
        if blocking is not None:
            print(f"covertsec: blocking condition: {blocking}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"covertsec: numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"covertsec: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
