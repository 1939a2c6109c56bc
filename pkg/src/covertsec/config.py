"""Scenario files: JSON documents describing a plant, its attack scenarios,
an optional defense and coding scheme, and the simulation settings.

Matrices are nested decimal arrays so that printed four-digit values stay
auditable. Errors name the JSON line (syntax) or the field path (content).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attacks import AttackScenario, make_scenario
from .coding import CodingScheme, DefenseSpecification, encoder_from_decoder, scheme_from_dict, scheme_to_dict
from .errors import CovertSecError, ValidationError
from .lti import StateSpaceSystem
from .simulation import InputProgram, SimulationConfig, config_from_dict

FORMAT = "covertsec-scenario/1"
_TOP_FIELDS = {"format", "name", "system", "scenarios", "defense", "simulation", "attack_signal", "scheme"}


class ConfigError(ValidationError):
    def __init__(self, message: str, field_path: str = "", line: Optional[int] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_path:
            where.append(f"field '{field_path}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field_path = field_path
        self.line = line


def _matrix(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError("expected a non-empty list of rows", path)
    width = len(value[0])
    for i, row in enumerate(value):
        if len(row) != width:
            raise ConfigError(f"row has {len(row)} entries, row 0 has {width}", f"{path}[{i}]")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"expected a number, got {v!r}", f"{path}[{i}][{j}]")
    return np.array(value, dtype=np.float64)


def _indices(value, path: str) -> tuple:
    if not isinstance(value, list):
        raise ConfigError("expected a list of 1-based channel indices", path)
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"expected an integer, got {v!r}", f"{path}[{i}]")
    return tuple(value)


def _require(block: dict, key: str, path: str):
    if not isinstance(block, dict):
        raise ConfigError("expected an object", path)
    if key not in block:
        raise ConfigError("missing required field", f"{path}.{key}" if path else key)
    return block[key]


def _scenario(block, m: int, p: int, path: str) -> AttackScenario:
    if not isinstance(block, dict):
        raise ConfigError("expected an object with 'inputs' and 'outputs'", path)
    inputs = _indices(block.get("inputs", []), f"{path}.inputs")
    outputs = _indices(block.get("outputs", []), f"{path}.outputs")
    extra = set(block) - {"inputs", "outputs"}
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", path)
    try:
        return make_scenario(m, p, inputs, outputs)
    except ValidationError as exc:
        raise ConfigError(str(exc), path) from None


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    system: StateSpaceSystem
    scenarios: dict
    simulation: SimulationConfig
    attack_signal: InputProgram
    defense: Optional[DefenseSpecification] = None
    theorem2_tolerance: Optional[float] = None
    scheme: Optional[CodingScheme] = None
    scheme_source: Optional[dict] = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def scenario(self, name: str) -> AttackScenario:
        try:
            return self.scenarios[name]
        except KeyError:
            raise ConfigError(f"unknown scenario {name!r}; available: {sorted(self.scenarios)}", "scenarios") from None

    def to_dict(self) -> dict:
        sys = self.system
        data = {
            "format": FORMAT,
            "name": self.name,
            "system": {"A": sys.A.tolist(), "B": sys.B.tolist(), "C": sys.C.tolist(), "sample_period": sys.sample_period},
            "scenarios": {
                k: {"inputs": list(s.compromised_inputs), "outputs": list(s.compromised_outputs)}
                for k, s in self.scenarios.items()
            },
            "simulation": self.simulation.to_dict(),
            "attack_signal": _program_dict(self.attack_signal),
        }
        data["simulation"]["input_program"] = _program_dict(self.simulation.input_program)
        if self.defense is not None:
            d = self.defense
            data["defense"] = {
                "secure_input": d.secure_input,
                "secure_outputs": list(d.secure_outputs),
                "threat": {"inputs": list(d.threat.compromised_inputs), "outputs": list(d.threat.compromised_outputs)},
            }
            if self.theorem2_tolerance is not None:
                data["defense"]["theorem2_tolerance"] = self.theorem2_tolerance
        if self.scheme_source is not None:
            data["scheme"] = self.scheme_source
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _program_dict(prog: InputProgram) -> dict:
    out = {"kind": prog.kind}
    for key in ("level", "slope", "amplitude", "period"):
        out[key] = float(getattr(prog, key))
    if prog.values is not None:
        out["values"] = [list(r) if isinstance(r, tuple) else r for r in prog.values]
    if prog.channels is not None:
        out["channels"] = list(prog.channels)
    return out


def _program(block, path: str) -> InputProgram:
    if not isinstance(block, dict):
        raise ConfigError("expected an object", path)
    block = dict(block)
    for key in ("values", "channels"):
        if block.get(key) is not None:
            block[key] = tuple(tuple(r) if isinstance(r, list) else r for r in block[key])
    try:
        return InputProgram(**block)
    except TypeError as exc:
        raise ConfigError(str(exc), path) from None
    except ValidationError as exc:
        raise ConfigError(str(exc), path) from None


def _scheme(block, m: int, base: Optional[Path]) -> CodingScheme:
    path = "scheme"
    if not isinstance(block, dict):
        raise ConfigError("expected an object", path)
    try:
        if "path" in block:
            ref = Path(block["path"])
            if base is not None and not ref.is_absolute():
                ref = base / ref
            try:
                text = ref.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read scheme file: {exc.strerror}", f"{path}.path") from None
            scheme = scheme_from_dict(_loads(text, str(ref)))
        elif "decoder" in block:
            dec = block["decoder"]
            mats = {k: _matrix(_require(dec, k, f"{path}.decoder"), f"{path}.decoder.{k}") for k in ("A_d", "B_d", "C_d", "D_d")}
            T = _matrix(dec["T"], f"{path}.decoder.T") if "T" in dec else None
            scheme = encoder_from_decoder(
                mats["A_d"], mats["B_d"], mats["C_d"], mats["D_d"], T,
                exact=bool(block.get("exact", False)), label=str(block.get("label", "scheme")),
            )
        else:
            scheme = scheme_from_dict(block)
    except ConfigError:
        raise
    except CovertSecError as exc:
        raise ConfigError(str(exc), path) from None
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"dimension mismatch: {exc}", path) from None
    if scheme.m != m:
        raise ConfigError(f"scheme acts on {scheme.m} inputs, system has {m}", path)
    return scheme


def _loads(text: str, source: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON ({exc.msg}, column {exc.colno})", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    return data


def parse_scenario_file(data: dict, base: Optional[Path] = None) -> ScenarioFile:
    fmt = data.get("format", FORMAT)
    if fmt != FORMAT:
        raise ConfigError(f"unsupported format {fmt!r}, expected {FORMAT!r}", "format")
    unknown = set(data) - _TOP_FIELDS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "")
    sys_block = _require(data, "system", "")
    A = _matrix(_require(sys_block, "A", "system"), "system.A")
    B = _matrix(_require(sys_block, "B", "system"), "system.B")
    C = _matrix(_require(sys_block, "C", "system"), "system.C")
    period = sys_block.get("sample_period", 1.0)
    try:
        system = StateSpaceSystem(A, B, C, float(period))
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "system") from None

    scen_block = data.get("scenarios", {})
    if not isinstance(scen_block, dict):
        raise ConfigError("expected an object mapping names to scenarios", "scenarios")
    scenarios = {k: _scenario(v, system.m, system.p, f"scenarios.{k}") for k, v in scen_block.items()}

    defense, tol = None, None
    if data.get("defense") is not None:
        d = data["defense"]
        secure_input = _require(d, "secure_input", "defense")
        outs = _indices(_require(d, "secure_outputs", "defense"), "defense.secure_outputs")
        if len(outs) != 2:
            raise ConfigError("exactly two secured outputs are required", "defense.secure_outputs")
        threat = _scenario(_require(d, "threat", "defense"), system.m, system.p, "defense.threat")
        defense = DefenseSpecification(int(secure_input), outs, threat)
        if d.get("theorem2_tolerance") is not None:
            tol = float(d["theorem2_tolerance"])

    try:
        sim = config_from_dict(data.get("simulation", {}))
    except (ValidationError, TypeError) as exc:
        raise ConfigError(str(exc), "simulation") from None
    attack_signal = _program(data.get("attack_signal", {"kind": "step", "level": 1.0}), "attack_signal")

    scheme = None
    if data.get("scheme") is not None:
        scheme = _scheme(data["scheme"], system.m, base)

    return ScenarioFile(
        name=str(data.get("name", "unnamed")),
        system=system,
        scenarios=scenarios,
        simulation=sim,
        attack_signal=attack_signal,
        defense=defense,
        theorem2_tolerance=tol,
        scheme=scheme,
        scheme_source=data.get("scheme"),
        raw=data,
    )


def loads(text: str, source: str = "<string>", base: Optional[Path] = None) -> ScenarioFile:
    return parse_scenario_file(_loads(text, source), base)


def load(path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, str(path), path.parent)


def save_scheme(scheme: CodingScheme, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scheme_to_dict(scheme), indent=2) + "\n")
    return path


def load_scheme(path) -> CodingScheme:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return scheme_from_dict(_loads(text, str(path)))
    except ConfigError:
        raise
    except CovertSecError as exc:
        raise ConfigError(f"{path}: {exc}") from None
