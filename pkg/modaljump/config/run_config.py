"""
Run configuration files: INI sections [model], [initial], [numerics], [run], [probe]
validated into a RunConfig, plus the commented template and manifest reloading.
"""
import configparser
import json
import re
from pathlib import Path
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ConfigError
from .model_config import (APPROXIMATIONS, BASIS_KINDS, DEFAULT_PRESET, DEFAULT_SEED,
                           DEFAULT_TRAJECTORIES, INITIAL_STATES, PRESET_MODEL_FIELDS, PRESETS)
from .system_config import (BATCH_SIZE, DEFAULT_DT, LEAKAGE_HARD_LIMIT, LEAKAGE_TOLERANCE, P_MAX,
                            PROBABILITY_FLOOR)

SECTIONS = ('model', 'initial', 'numerics', 'run', 'probe')
PROBES = ('ctau', 'rates-at', 'born-at')
DEFAULT_T_FINAL = 10.0

_SECTION_RE = re.compile(r'^\s*\[([^\]]+)\]')
_KEY_RE = re.compile(r'^\s*([^\s=:#;\[][^=:]*?)\s*[=:]')


def _split(value):
    """'1, 2, 3' -> ['1', '2', '3']; lists pass through"""
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return value


def _complex_pair(value):
    if isinstance(value, (list, tuple)):
        re_part, im_part = value
        return (float(re_part), float(im_part))
    number = complex(str(value).replace(' ', '')) if isinstance(value, str) else complex(value)
    return (number.real, number.imag)


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class ModelSection(_Section):
    preset: Optional[Literal[tuple(PRESETS)]] = None
    num_modes: Optional[int] = Field(default=None, ge=1)
    couplings: Optional[Tuple[Tuple[float, float], ...]] = None
    detunings: Optional[Tuple[float, ...]] = None
    rabi: Optional[float] = Field(default=None, ge=0)
    basis: Optional[Literal[BASIS_KINDS]] = None
    approximation: Literal[APPROXIMATIONS] = 'exact'

    @field_validator('couplings', mode='before')
    @classmethod
    def parse_couplings(cls, value):
        if value is None:
            return None
        return tuple(_complex_pair(item) for item in _split(value))

    @field_validator('detunings', mode='before')
    @classmethod
    def parse_detunings(cls, value):
        return None if value is None else tuple(_split(value))

    @model_validator(mode='after')
    def check_model(self):
        conflicts = preset_conflicts(self)
        if conflicts:
            key, given, pinned = conflicts[0]
            raise ValueError(f"'{key}' = {given!r} conflicts with preset '{self.preset}' ({pinned!r})")
        if self.preset is None and self.explicit_fields():
            missing = [key for key in ('couplings', 'detunings', 'rabi') if getattr(self, key) is None]
            if missing:
                raise ValueError(f"a model without a preset needs {', '.join(missing)}")
        couplings, detunings = self.couplings, self.detunings
        if couplings is not None and detunings is not None and len(couplings) != len(detunings):
            raise ValueError(f"{len(couplings)} couplings but {len(detunings)} detunings")
        for values in (couplings, detunings):
            if values is not None and self.num_modes is not None and len(values) != self.num_modes:
                raise ValueError(f"num_modes = {self.num_modes} but {len(values)} values given")
        return self

    def explicit_fields(self):
        return [key for key in PRESET_MODEL_FIELDS if getattr(self, key) is not None]


def _preset_value(preset, key):
    value = PRESETS[preset][key]
    if key == 'couplings':
        return tuple(_complex_pair(g) for g in value)
    if key == 'detunings':
        return tuple(float(d) for d in value)
    return value


def preset_conflicts(section):
    """(key, given, preset value) for explicit model fields that disagree with the preset"""
    if section.preset is None:
        return []
    conflicts = []
    for key in PRESET_MODEL_FIELDS:
        given = getattr(section, key)
        if given is not None and given != _preset_value(section.preset, key):
            conflicts.append((key, given, _preset_value(section.preset, key)))
    return conflicts


class InitialSection(_Section):
    state: Optional[str] = None
    occupations: Optional[Tuple[int, ...]] = None

    @field_validator('state')
    @classmethod
    def check_state(cls, value):
        if value is None or value in INITIAL_STATES:
            return value
        amplitudes = [complex(item.replace(' ', '')) for item in _split(value)]
        if len(amplitudes) != 2 or not any(amplitudes):
            raise ValueError(f"state must be one of {INITIAL_STATES} or two amplitudes 'ground, excited'")
        return value

    @field_validator('occupations', mode='before')
    @classmethod
    def parse_occupations(cls, value):
        return None if value is None else tuple(_split(value))

    def amplitudes(self):
        """Named state or normalised-later (ground, excited) amplitudes"""
        if self.state is None or self.state in INITIAL_STATES:
            return self.state
        return [complex(item.replace(' ', '')) for item in _split(self.state)]


class NumericsSection(_Section):
    cutoff: Optional[int] = Field(default=None, ge=1)
    dt: float = Field(default=DEFAULT_DT, gt=0)
    t_final: Optional[float] = Field(default=None, gt=0)
    leakage_tolerance: float = Field(default=LEAKAGE_TOLERANCE, gt=0)
    leakage_hard_limit: float = Field(default=LEAKAGE_HARD_LIMIT, gt=0)
    p_max: float = Field(default=P_MAX, gt=0, le=1)
    probability_floor: float = Field(default=PROBABILITY_FLOOR, ge=0)


class RunSection(_Section):
    n_trajectories: int = Field(default=DEFAULT_TRAJECTORIES, ge=1)
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    threads: Optional[int] = Field(default=None, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=1)
    output_dir: Optional[str] = None
    unraveling: Optional[Literal[BASIS_KINDS]] = None
    cache: Optional[str] = None


class ProbeSection(_Section):
    what: Literal[PROBES] = 'ctau'
    time: float = Field(default=0.0, ge=0)
    tau: Optional[int] = Field(default=None, ge=1)
    config: Optional[Tuple[int, ...]] = None

    @field_validator('config', mode='before')
    @classmethod
    def parse_config(cls, value):
        return None if value is None else tuple(_split(value))


class RunConfig(_Section):
    """Everything a run needs; unset model fields come from the preset on resolve()"""
    model: ModelSection = Field(default_factory=ModelSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    numerics: NumericsSection = Field(default_factory=NumericsSection)
    run: RunSection = Field(default_factory=RunSection)
    probe: ProbeSection = Field(default_factory=ProbeSection)

    @model_validator(mode='after')
    def check_unraveling(self):
        basis = self.model.basis or (PRESETS[self.model.preset]['basis'] if self.model.preset else None)
        if self.run.unraveling and basis and self.run.unraveling != basis:
            raise ValueError(f"unraveling '{self.run.unraveling}' needs a {self.run.unraveling}-basis "
                             f"model, the model is {basis}")
        if self.numerics.t_final is not None and self.numerics.t_final < self.numerics.dt:
            raise ValueError(f"t_final {self.numerics.t_final} shorter than dt {self.numerics.dt}")
        return self

    @classmethod
    def from_preset(cls, name=None):
        return cls(model=ModelSection(preset=name or DEFAULT_PRESET)).resolve()

    def resolve(self):
        """Copy with every preset-dependent field filled in"""
        model = self.model
        preset_name = model.preset
        if preset_name is None and not model.explicit_fields():
            preset_name = DEFAULT_PRESET
        preset = PRESETS[preset_name] if preset_name else {}
        couplings = model.couplings or _preset_value(preset_name, 'couplings')
        detunings = model.detunings or _preset_value(preset_name, 'detunings')
        basis = model.basis or preset.get('basis') or self.run.unraveling or 'spectral'
        resolved = self.model_dump()
        resolved['model'].update(
            preset=preset_name, num_modes=len(couplings), couplings=couplings, detunings=detunings,
            rabi=model.rabi if model.rabi is not None else preset['rabi'], basis=basis)
        resolved['initial']['state'] = self.initial.state or preset.get('initial', 'ground')
        if resolved['numerics']['cutoff'] is None:
            if not preset:
                raise ConfigError("[numerics] cutoff is required for a model without a preset")
            resolved['numerics']['cutoff'] = preset['cutoff']
        if resolved['numerics']['t_final'] is None:
            resolved['numerics']['t_final'] = preset.get('t_final', DEFAULT_T_FINAL)
        resolved['run']['unraveling'] = basis
        resolved['run']['batch_size'] = resolved['run']['batch_size'] or BATCH_SIZE
        return RunConfig.model_validate(resolved)

    def with_overrides(self, section, **values):
        """Re-validated copy with non-None values replaced in one section"""
        data = self.model_dump()
        data[section].update({key: value for key, value in values.items() if value is not None})
        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(_first_message(e)) from e

    def as_manifest_dict(self):
        return self.model_dump(mode='json')


def _first_message(error):
    first = error.errors()[0]
    location = '.'.join(str(part) for part in first['loc'])
    message = first['msg']
    return f"{location}: {message}" if location else message


def _key_lines(text):
    """(section, key) -> 1-based line number; (section, None) for headers"""
    lines = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1).strip()
            lines[(section, None)] = number
            continue
        key = _KEY_RE.match(line)
        if key and section is not None:
            lines[(section, key.group(1).strip().lower())] = number
    return lines


def _locate(error, raw, lines):
    """Line of the key a validation error refers to, best effort"""
    loc = error['loc']
    if len(loc) >= 2 and (loc[0], loc[1]) in lines:
        return lines[(loc[0], loc[1])]
    if loc and loc[0] == 'model':
        try:
            conflicts = preset_conflicts(ModelSection.model_construct(**_construct_model(raw.get('model', {}))))
        except (KeyError, TypeError, ValueError):
            conflicts = []
        if conflicts:
            return lines.get(('model', conflicts[0][0]))
    if loc:
        return lines.get((loc[0], None))
    return None


def _construct_model(values):
    """Best-effort typed view of a raw [model] section for conflict lookup"""
    section = {key: None for key in PRESET_MODEL_FIELDS}
    section['preset'] = values.get('preset')
    for key in PRESET_MODEL_FIELDS:
        if key not in values:
            continue
        value = values[key]
        if key == 'couplings':
            section[key] = tuple(_complex_pair(item) for item in _split(value))
        elif key == 'detunings':
            section[key] = tuple(float(item) for item in _split(value))
        elif key == 'rabi':
            section[key] = float(value)
        elif key == 'num_modes':
            section[key] = int(value)
        else:
            section[key] = value
    return section


def parse_run_config(text, path='<config>'):
    """Validate INI text into a RunConfig (unresolved)

    Args:
        text (str): INI contents.
        path (str, optional): Name used in error messages.

    Returns:
        RunConfig: The validated configuration.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string(text, source=str(path))
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate key '{e.option}' in [{e.section}]", path, e.lineno) from e
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", path, e.lineno) from e
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside any section", path, e.lineno) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError("malformed line", path, line) from e

    lines = _key_lines(text)
    raw = {section: {key: value for key, value in parser.items(section) if value != ''}
           for section in parser.sections()}
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(_first_message(e), path, _locate(first, raw, lines)) from e


def load_run_config(path):
    """Read a run configuration: INI text, or a run_manifest.json from an earlier run

    Returns:
        RunConfig: Validated configuration; call resolve() once overrides are applied.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", path) from e
    if path.suffix == '.json':
        try:
            data = json.loads(text)
            return RunConfig.model_validate(data["config"])
        except (json.JSONDecodeError, KeyError) as e:
            raise ConfigError(f"not a run manifest: {e}", path) from e
        except ValidationError as e:
            raise ConfigError(_first_message(e), path) from e
    return parse_run_config(text, path)


def _format_list(values):
    return ', '.join(repr(v) for v in values)


def _format_couplings(pairs):
    return ', '.join(repr(re_part) if im_part == 0 else repr(complex(re_part, im_part)).strip('()')
                     for re_part, im_part in pairs)


def render_template(preset=None):
    """Commented INI file with every key at its default

    Args:
        preset (str, optional): Preset whose model values are shown. Defaults to DEFAULT_PRESET.

    Returns:
        str: Template text.
    """
    config = RunConfig.from_preset(preset)
    model, initial, numerics, run, probe = (config.model, config.initial, config.numerics,
                                            config.run, config.probe)
    return f"""# modal-jumps run configuration
# Units: hbar = 1, times in 1/g. Empty values fall back to the defaults shown.

[model]
# one of: {', '.join(PRESETS)}; explicit values below must agree with the preset
preset = {model.preset}
# number of bath modes kappa
num_modes = {model.num_modes}
# complex couplings g_k, comma separated (e.g. 1, 0.5+0.5j)
couplings = {_format_couplings(model.couplings)}
# detunings Omega_k = w_k - w0
detunings = {_format_list(model.detunings)}
# Rabi frequency Omega of the classical drive
rabi = {model.rabi!r}
# bath basis of the model and its unraveling: {', '.join(BASIS_KINDS)}
basis = {model.basis}
# {', '.join(APPROXIMATIONS)} (second-rwa: three modes at -Omega, 0, Omega only)
approximation = {model.approximation}

[initial]
# {', '.join(INITIAL_STATES)}, or amplitudes 'ground, excited'
state = {initial.state}
# bath Fock state, comma separated (vacuum when empty)
occupations =

[numerics]
# Fock cutoff N_max per mode
cutoff = {numerics.cutoff}
# integrator and jump step
dt = {numerics.dt!r}
t_final = {numerics.t_final!r}
# top-Fock-level probability that flags a run, and that aborts it
leakage_tolerance = {numerics.leakage_tolerance!r}
leakage_hard_limit = {numerics.leakage_hard_limit!r}
# per-step jump probability above which a step is reported
p_max = {numerics.p_max!r}
# Born probability below which outgoing rates are clamped
probability_floor = {numerics.probability_floor!r}

[run]
n_trajectories = {run.n_trajectories}
seed = {run.seed}
# worker threads for ensembles (all cores when empty)
threads =
# trajectories per vectorised batch (recorded in the manifest; MODALJUMP_BATCH_SIZE when empty)
batch_size = {run.batch_size}
# output directory (MODALJUMP_OUTPUT_DIR and --out take precedence)
output_dir =
# guiding snapshot cache (.npz), reused when it matches the run
cache =

[probe]
# {', '.join(PROBES)}
what = {probe.what}
time = {probe.time!r}
# temporal-mode index 1..kappa for ctau (all when empty)
tau =
# source configuration for rates-at (vacuum when empty)
config =
"""
