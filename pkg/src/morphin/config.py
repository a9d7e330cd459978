"""Load experiment specs from YAML, apply dotted overrides, and echo them back.

A config file is a mapping with these top-level keys::

    scenario: gridworld_goals | gridworld_actions | traffic
    episodes: int
    trials: int
    base_seed: int                 # unsigned 64-bit
    convergence_window: int        # optional, default 30
    convergence_tolerance: float   # optional, default 0.25
    morphin:  {AgentConfig fields, ph: {PageHinkleyConfig fields}}
    baseline: {same as morphin}
    env:      {GridworldConfig or TrafficConfig fields}

Every key is optional except ``scenario``, ``episodes`` and ``trials``;
omitted keys take the dataclass defaults. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import enum
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from morphin.agents import AgentConfig
from morphin.drift import PageHinkleyConfig
from morphin.envs import GridworldConfig, TrafficConfig
from morphin.harness import ExperimentSpec
from morphin.qcore import ContractViolation

CANNED = (
    "gridworld_goals",
    "gridworld_actions",
    "traffic",
    "gridworld_goals_desk",
    "gridworld_actions_desk",
    "traffic_desk",
)
TOP_LEVEL = (
    "scenario", "episodes", "trials", "base_seed",
    "convergence_window", "convergence_tolerance", "morphin", "baseline", "env",
)
REQUIRED = ("scenario", "episodes", "trials")
DEFAULT_SEED = 0


class ConfigError(ValueError):
    """A config that cannot become a valid :class:`ExperimentSpec`.

    ``field`` is the dotted key path and ``line`` the 1-based source line
    when known.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None, source: str | None = None):
        self.field = field
        self.line = line
        self.source = source
        self.detail = message
        super().__init__(self._render())

    def _render(self) -> str:
        where = []
        if self.source:
            where.append(str(self.source))
        if self.line is not None:
            where.append(f"line {self.line}")
        prefix = ":".join(where)
        field = f"field '{self.field}': " if self.field else ""
        return f"{prefix}: {field}{self.detail}" if prefix else f"{field}{self.detail}"


def _key_lines(node, prefix: str = "", out: dict | None = None) -> dict[str, int]:
    """Map dotted key paths to the line their key appears on."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = f"{prefix}.{key.value}" if prefix else str(key.value)
            out[path] = key.start_mark.line + 1
            _key_lines(value, path, out)
    return out


def canned_path(name: str) -> Path:
    if name not in CANNED:
        raise ConfigError(f"unknown canned config {name!r}; choose from {', '.join(CANNED)}")
    return Path(str(resources.files("morphin") / "configs" / f"{name}.yaml"))


def resolve_config_path(ref: str | Path) -> Path:
    """A filesystem path, or the name of a bundled config."""
    p = Path(ref)
    if p.exists() or p.suffix in (".yaml", ".yml") or "/" in str(ref):
        return p
    return canned_path(str(ref))


def read_config(path: str | Path) -> tuple[dict, dict[str, int]]:
    """Parse a YAML file into a raw mapping and a key-to-line index.

    Raises ``OSError`` when the file cannot be read and :class:`ConfigError`
    when it is not a YAML mapping.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", source=str(path))
    text = path.read_text()
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line=line, source=str(path)) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source=str(path))
    return data, _key_lines(node)


def parse_override(text: str) -> tuple[str, Any]:
    """``"morphin.ph.threshold_h=200"`` -> ``("morphin.ph.threshold_h", 200)``."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError:
        raise ConfigError(f"cannot parse value {raw!r}", field=key) from None
    if isinstance(value, str):
        # YAML 1.1 reads forms like 1e-3 as strings
        try:
            value = float(value)
        except ValueError:
            pass
    return key, value


def apply_overrides(data: dict, overrides) -> dict:
    """Return a copy of ``data`` with each ``(dotted_key, value)`` written in."""
    out = _deep_copy(data)
    for key, value in overrides:
        parts = key.split(".")
        if parts[0] not in TOP_LEVEL:
            raise ConfigError("unknown key", field=key)
        node = out
        for i, part in enumerate(parts[:-1]):
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigError(f"'{'.'.join(parts[: i + 1])}' is not a mapping", field=key)
            node = child
        node[parts[-1]] = value
    return out


def _deep_copy(d):
    if isinstance(d, dict):
        return {k: _deep_copy(v) for k, v in d.items()}
    if isinstance(d, list):
        return [_deep_copy(v) for v in d]
    return d


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _coerce(value, default, path: str):
    """Check ``value`` against the kind of the dataclass default it replaces."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", field=path)
        return value
    if isinstance(default, enum.Enum):
        try:
            return type(default)(value)
        except ValueError:
            choices = ", ".join(m.value for m in type(default))
            raise ConfigError(f"expected one of {choices}, got {value!r}", field=path) from None
    if _is_int(default):
        if not _is_int(value):
            raise ConfigError(f"expected an integer, got {value!r}", field=path)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", field=path)
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", field=path)
        return tuple(value)
    return value


# fields whose default is None but which take an integer when set
_OPTIONAL_INTS = {"goal_swap_period", "jump_introduction_episode"}


def _build(cls, raw, path: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"expected a mapping, got {raw!r}", field=path)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        sub = f"{path}.{key}"
        if key not in fields:
            raise ConfigError(f"unknown key for {cls.__name__}", field=sub)
        f = fields[key]
        if cls is AgentConfig and key == "ph":
            kwargs[key] = _build(PageHinkleyConfig, value, sub)
            continue
        if key in _OPTIONAL_INTS:
            if value is not None and not _is_int(value):
                raise ConfigError(f"expected an integer or null, got {value!r}", field=sub)
            kwargs[key] = value
            continue
        kwargs[key] = _coerce(value, f.default, sub)
    try:
        return cls(**kwargs)
    except (ContractViolation, TypeError) as exc:
        raise ConfigError(str(exc), field=_guess_field(path, str(exc), fields)) from None


def _guess_field(path: str, message: str, fields) -> str:
    """Point at the field a constructor error names, or at the block itself."""
    named = [name for name in fields if name in message]
    if named:
        # the field the message opens with is the one at fault
        return f"{path}.{min(named, key=lambda n: (message.index(n), -len(n)))}"
    return path


def spec_from_dict(data: dict, source: str | None = None, lines: dict[str, int] | None = None) -> ExperimentSpec:
    """Validate a raw mapping into an :class:`ExperimentSpec`."""
    lines = lines or {}
    try:
        return _spec_from_dict(data)
    except ConfigError as exc:
        if exc.field is not None and exc.line is None:
            key = exc.field
            while key and key not in lines:
                key = key.rpartition(".")[0]
            exc.line = lines.get(key)
        exc.source = exc.source or source
        exc.args = (exc._render(),)
        raise


def _spec_from_dict(data: dict) -> ExperimentSpec:
    for key in data:
        if key not in TOP_LEVEL:
            raise ConfigError("unknown key", field=str(key))
    for key in REQUIRED:
        if key not in data:
            raise ConfigError("missing required key", field=key)
    scenario = data["scenario"]
    env_cls = TrafficConfig if scenario == "traffic" else GridworldConfig
    env = _build(env_cls, data.get("env"), "env")
    morphin = _build(AgentConfig, data.get("morphin"), "morphin")
    baseline = _build(AgentConfig, data.get("baseline"), "baseline")
    top = {"base_seed": DEFAULT_SEED}
    for key, default in (
        ("episodes", 1), ("trials", 1), ("base_seed", DEFAULT_SEED),
        ("convergence_window", 30), ("convergence_tolerance", 0.25),
    ):
        if key in data:
            top[key] = _coerce(data[key], default, key)
    try:
        return ExperimentSpec(scenario=scenario, morphin=morphin, baseline=baseline, env=env, **top)
    except ContractViolation as exc:
        msg = str(exc)
        named = [k for k in TOP_LEVEL if k in msg]
        raise ConfigError(msg, field=named[0] if named else "scenario") from None


def load_spec(ref: str | Path, overrides=()) -> ExperimentSpec:
    """Read a config path or canned name, apply overrides, and validate."""
    path = resolve_config_path(ref)
    data, lines = read_config(path)
    data = apply_overrides(data, overrides)
    return spec_from_dict(data, source=str(path), lines=lines)


def _plain(value):
    if isinstance(value, enum.Enum):
        return value.value
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Plain mapping that :func:`spec_from_dict` turns back into ``spec``."""
    return _plain(spec)


def dump_spec(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False)

