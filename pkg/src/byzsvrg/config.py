"""Run configuration: INI-style documents with a fixed, validated schema.

Example::

    [problem]
    kind = quadratic
    d = 10
    noise = 1.0

    [workers]
    K = 8
    alpha = 0

    [algorithm]
    B = 16
    T = 10
    delta = 1e-4

    [run]
    seed = 1

Keys are case-sensitive.  Unknown sections/keys and duplicates are errors,
and every error in the document is reported at once.
"""
import configparser
import math
import os
import re
from dataclasses import asdict, dataclass, field, replace

from .adversary import STRATEGIES, AttackSpec
from .errors import ConfigError
from .problems import PROBLEM_ALIASES, make_problem
from .tuning import default_step_size

OUTPUT_DIR_ENV = "BYZSVRG_OUTPUT_DIR"


def _vector_or_scalar(text):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    values = [float(p) for p in parts]
    return values[0] if len(values) == 1 else values


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _optional_int(text):
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


# section -> key -> (parser, default); default None means optional
SCHEMA = {
    "problem": {
        "kind": (str, "quadratic"),
        "d": (int, 10),
        "noise": (float, 1.0),
        "center": (_vector_or_scalar, 0.0),
        "samples": (int, 64),
        "reg": (float, 0.1),
        "label_noise": (float, 0.1),
        "data_seed": (int, 0),
    },
    "workers": {
        "K": (int, 8),
        "alpha": (float, 0.0),
        "attack": (str, "gaussian_blast"),
        "magnitude": (float, 1000.0),
        "knowledge": (str, "blind"),
    },
    "algorithm": {
        "B": (int, 16),
        "T": (int, 10),
        "eta": (_optional_float, None),
        "delta": (float, 1e-4),
        "n_max": (_optional_int, None),
        "x0": (_vector_or_scalar, 1.0),
        "mode": (str, "filtered"),
    },
    "run": {
        "seed": (int, 0),
        "epsilon": (_optional_float, None),
        "output_dir": (str, ""),
        "allow_infeasible": (_bool, False),
        "wall_time": (_bool, False),
        "divergence_radius": (float, 1e6),
        "divergence_factor": (float, 100.0),
    },
}

MODES = ("filtered", "naive_mean")


@dataclass(frozen=True)
class RunConfig:
    kind: str = "quadratic"
    d: int = 10
    noise: float = 1.0
    center: object = 0.0
    samples: int = 64
    reg: float = 0.1
    label_noise: float = 0.1
    data_seed: int = 0
    K: int = 8
    alpha: float = 0.0
    attack: str = "gaussian_blast"
    magnitude: float = 1000.0
    knowledge: str = "blind"
    B: int = 16
    T: int = 10
    eta: float = None
    delta: float = 1e-4
    n_max: int = None
    x0: object = 1.0
    mode: str = "filtered"
    seed: int = 0
    epsilon: float = None
    output_dir: str = ""
    allow_infeasible: bool = False
    wall_time: bool = False
    divergence_radius: float = 1e6
    divergence_factor: float = 100.0
    eta_overridden: bool = field(default=False, compare=False)

    def problem(self):
        return make_problem(
            self.kind,
            self.d,
            noise=self.noise,
            center=self.center,
            samples=self.samples,
            reg=self.reg,
            label_noise=self.label_noise,
            data_seed=self.data_seed,
        )

    def attack_spec(self):
        return AttackSpec(self.attack, self.magnitude, self.knowledge)

    @property
    def inner_cap(self):
        return 50 * self.B if self.n_max is None else self.n_max

    def resolved_output_dir(self):
        return self.output_dir or os.environ.get(OUTPUT_DIR_ENV, "") or "."

    def to_dict(self):
        d = asdict(self)
        d["n_max"] = self.inner_cap
        return d

    def to_ini(self):
        """Serialize back to the document format (round-trips through parse_config)."""
        lines = []
        values = asdict(self)
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                v = values[key]
                if v is None:
                    continue
                if isinstance(v, (list, tuple)):
                    v = ", ".join(repr(float(x)) for x in v)
                elif isinstance(v, bool):
                    v = str(v).lower()
                elif isinstance(v, float):
                    v = repr(v)
                lines.append(f"{key} = {v}")
            lines.append("")
        return "\n".join(lines)


def validate_config(cfg):
    """Every range/consistency error in ``cfg`` (empty list if valid)."""
    errors = []
    if cfg.kind not in PROBLEM_ALIASES:
        errors.append(f"problem.kind must be one of {sorted(PROBLEM_ALIASES)}")
    if cfg.d < 1:
        errors.append("problem.d must be >= 1")
    if not (cfg.noise >= 0 and math.isfinite(cfg.noise)):
        errors.append("problem.noise must be a finite value >= 0")
    if isinstance(cfg.center, list) and len(cfg.center) != cfg.d:
        errors.append(f"problem.center has {len(cfg.center)} entries, expected d = {cfg.d}")
    if isinstance(cfg.x0, list) and len(cfg.x0) != cfg.d:
        errors.append(f"algorithm.x0 has {len(cfg.x0)} entries, expected d = {cfg.d}")
    if cfg.samples < 1:
        errors.append("problem.samples must be >= 1")
    if cfg.reg < 0:
        errors.append("problem.reg must be >= 0")
    if not 0 <= cfg.label_noise <= 1:
        errors.append("problem.label_noise must lie in [0, 1]")
    if cfg.K < 1:
        errors.append("workers.K must be >= 1")
    if cfg.alpha < 0:
        errors.append("alpha must be >= 0")
    if cfg.alpha >= 0.5:
        errors.append("alpha must be < 1/2")
    if cfg.attack not in STRATEGIES:
        errors.append(f"workers.attack must be one of {list(STRATEGIES)}")
    if cfg.magnitude < 0:
        errors.append("workers.magnitude must be >= 0")
    if cfg.knowledge not in ("blind", "omniscient"):
        errors.append("workers.knowledge must be blind or omniscient")
    elif cfg.attack in ("inside_threshold_drift", "median_copycat") and cfg.knowledge != "omniscient":
        errors.append(f"attack {cfg.attack} requires knowledge = omniscient")
    if cfg.B < 1:
        errors.append("algorithm.B must be >= 1")
    if cfg.T < 1:
        errors.append("algorithm.T must be >= 1")
    if not 0 < cfg.delta < 1:
        errors.append("algorithm.delta must lie in (0, 1)")
    if cfg.eta is not None and not cfg.eta > 0:
        errors.append("algorithm.eta must be > 0")
    if cfg.n_max is not None and cfg.n_max < 0:
        errors.append("algorithm.n_max must be >= 0")
    if cfg.mode not in MODES:
        errors.append(f"algorithm.mode must be one of {list(MODES)}")
    if cfg.epsilon is not None and not cfg.epsilon > 0:
        errors.append("run.epsilon must be > 0")
    if not cfg.divergence_radius > 0:
        errors.append("run.divergence_radius must be > 0")
    if not cfg.divergence_factor > 0:
        errors.append("run.divergence_factor must be > 0")
    if not 0 <= cfg.seed < 2**64:
        errors.append("run.seed must be a 64-bit unsigned integer")
    return errors


def _first_line_of(text, section, key):
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return lineno
    return None


def _read(text):
    parser = configparser.ConfigParser(
        interpolation=None, strict=True, inline_comment_prefixes=("#", ";"), default_section="__defaults__"
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        first = _first_line_of(text, exc.section, exc.option)
        raise ConfigError(
            f"duplicate key {exc.section}.{exc.option} on lines {first} and {exc.lineno}"
        ) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}] (second at line {exc.lineno})") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc.message}") from None
    return parser


def parse_config(text, overrides=None):
    """Parse and fully validate a run config; raises ConfigError listing all problems."""
    parser = _read(text)
    errors = []
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                errors.append(f"unknown key {section}.{key}")
                continue
            conv, _ = SCHEMA[section][key]
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                errors.append(f"{section}.{key}: cannot parse {raw!r} ({exc})")
    values.update(overrides or {})
    if errors:
        raise ConfigError(errors)
    return build_config(**values)


def build_config(**values):
    cfg = RunConfig(**values)
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    if cfg.eta is None:
        # smoothness is a property of the problem, so build it once here
        L = cfg.problem().smoothness
        cfg = replace(cfg, eta=default_step_size(L, cfg.B))
    else:
        cfg = replace(cfg, eta_overridden=True)
    return cfg
