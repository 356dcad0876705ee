import dataclasses
import logging
import re
import tomllib
from dataclasses import dataclass
from pathlib import Path

import platformdirs
import tomli_w

from .errors import ConfigError, ExpressionError, SolverError
from .examples import load_example
from .expression import parse_expression
from .model import SdeProblem
from .piecewise import PiecewiseFn

APP_CONFIG_FILE = Path(__file__).parent.parent / "config.toml"

METHOD_CHOICES = ("em", "emt", "both")

# Expected type of every run option, ints are accepted where floats are expected
OPTION_TYPES = {
    "method": str,
    "kappa": list,
    "paths": int,
    "k_min": int,
    "k_max": int,
    "seed": int,
    "x0": float,
    "T": float,
    "c_bar": float,
    "out": str,
    "workers": int,
    "chunk_size": int,
    "level": int,
    "samples": int,
}
# Options that override the problem rather than the run
PROBLEM_OPTIONS = ("x0", "T", "c_bar")
PROBLEM_KEYS = ("example", "drift", "diffusion", *PROBLEM_OPTIONS)
COEFFICIENT_KEYS = ("breakpoints", "branches")


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run apart from the problem itself.

    `x0`, `T` and `c_bar` are None unless they override the problem's values.
    """

    method: str = "emt"
    kappa: tuple[float, ...] = (1 / 16,)
    paths: int = 1024
    k_min: int = 4
    k_max: int = 10
    seed: int = 42
    out: str = "results"
    workers: int = 1
    chunk_size: int = 256
    level: int = 8
    samples: int = 2001
    x0: float | None = None
    T: float | None = None
    c_bar: float | None = None
    example: str | None = None
    config_file: str | None = None

    def __post_init__(self):
        if self.method not in METHOD_CHOICES:
            raise ConfigError(
                f"method must be one of {', '.join(METHOD_CHOICES)}, not {self.method!r}"
            )
        if not self.kappa:
            raise ConfigError("at least one kappa is needed")
        for kappa in self.kappa:
            if not 0 < kappa < 1:
                raise ConfigError("kappa must be in (0,1)")
        if self.paths < 2:
            raise ConfigError(f"paths must be at least 2, not {self.paths}")
        if not 1 <= self.k_min < self.k_max:
            raise ConfigError(
                f"levels must satisfy 1 <= k_min < k_max, got {self.k_min}:{self.k_max}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, not {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, not {self.workers}")
        if self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be at least 1, not {self.chunk_size}")
        if self.level < 1:
            raise ConfigError(f"level must be at least 1, not {self.level}")
        if self.samples < 2:
            raise ConfigError(f"samples must be at least 2, not {self.samples}")

    @classmethod
    def from_options(cls, options: dict, **extra):
        """Build from a dict of (already type-checked) options."""
        values = dict(options)
        if "kappa" in values:
            values["kappa"] = tuple(float(k) for k in values["kappa"])
        for key in PROBLEM_OPTIONS:
            if values.get(key) is not None:
                values[key] = float(values[key])
        return cls(**values, **extra)

    def with_overrides(self, **changes):
        """Copy with every change that is not None applied, validated again."""
        changes = {k: v for k, v in changes.items() if v is not None}
        if "kappa" in changes:
            changes["kappa"] = tuple(float(k) for k in changes["kappa"])
        return dataclasses.replace(self, **changes)

    def methods(self) -> list[tuple[str, float | None]]:
        """The (method, kappa) combinations to run, em only once."""
        combinations = []
        if self.method in ("em", "both"):
            combinations.append(("em", None))
        if self.method in ("emt", "both"):
            combinations.extend(("emt", kappa) for kappa in self.kappa)
        return combinations

    def to_dict(self) -> dict:
        """All set fields, with tuples as lists, e.g. for JSON or TOML output."""
        result = {}
        for key, value in dataclasses.asdict(self).items():
            if value is None:
                continue
            result[key] = list(value) if isinstance(value, tuple) else value
        return result


def check_options(options: dict, table: str, source: str | None = None, text: str = ""):
    """Raise `ConfigError` for unknown keys or values of the wrong type."""
    for key, value in options.items():
        if key not in OPTION_TYPES:
            raise ConfigError(
                f"unknown key {key!r} in [{table}]",
                source,
                _locate_key(text, table, key),
            )
        expected = OPTION_TYPES[key]
        if key == "kappa" and isinstance(value, (int, float)):
            options[key] = value = [value]
        if expected is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        elif expected is list:
            ok = isinstance(value, list) and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
            )
        else:
            ok = isinstance(value, expected) and not isinstance(value, bool)
        if not ok:
            raise ConfigError(
                f"[{table}] {key} should be of type {expected.__name__}, not {value!r}",
                source,
                _locate_key(text, table, key),
            )


class Config:
    """Container for the combined app and user configuration data.

    The app's package directory contains a `config.toml` whose `[default_options]`
    table holds the default run options. An optional user `config.toml` in the
    platform's user config directory, e.g.

    Windows:  c:/Users/<user>/AppData/Roaming/transformed_euler/config.toml
    macOS:    /Users/<user>/Library/Application Support/transformed_euler/config.toml
    Linux:    /home/<user>/.config/transformed_euler/config.toml

    can override any of them in its `[options]` table. Missing entries in the user
    options are filled from the defaults. Unlike the app config, the user config is
    never created implicitly; `Config.save()` writes it.
    """

    def __init__(
        self, app_config_file: Path | None = None, user_config_file: Path | None = None
    ):
        if app_config_file is None:
            app_config_file = APP_CONFIG_FILE
        self.app_config = self.load_config_toml(app_config_file)
        logging.info(f"App configuration loaded from: {app_config_file}")
        check_options(
            self.app_config["default_options"],
            "default_options",
            str(app_config_file),
            Path(app_config_file).read_text(encoding="utf-8"),
        )

        if user_config_file is None:
            self.user_config_file = (
                Path(platformdirs.user_config_dir("transformed_euler", roaming=True))
                / "config.toml"
            )
        else:
            self.user_config_file = Path(user_config_file)

        if self.user_config_file.exists() is True:
            self.user_config = self.load_config_toml(self.user_config_file)
            logging.info(f"User configuration loaded from: {self.user_config_file}")
            self.user_config.setdefault("options", {})
            check_options(
                self.user_config["options"],
                "options",
                str(self.user_config_file),
                self.user_config_file.read_text(encoding="utf-8"),
            )
        else:
            self.user_config = {"options": {}}
        self.extend_user_config(self.user_config, self.app_config)

        # Expose the merged options at top level
        self.options = self.user_config["options"]

    @staticmethod
    def load_config_toml(path: Path) -> dict:
        """Load a config from a TOML file, turning syntax errors into `ConfigError`."""
        text = Path(path).read_text(encoding="utf-8")
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as error:
            line, column = _decode_error_position(error)
            raise ConfigError(f"invalid TOML: {error}", str(path), line, column) from None

    def extend_user_config(self, user_config, app_config):
        """Make sure the user's options contain every default option."""
        for option in app_config["default_options"]:
            if option not in user_config["options"]:
                user_config["options"][option] = app_config["default_options"][option]

    def run_config(self, **extra) -> RunConfig:
        return RunConfig.from_options(self.options, **extra)

    def save(self, path: Path | None = None):
        """Save user config to file.

        If no path is provided, it defaults to the current value of `user_config_file`.
        """
        if path is None:
            path = self.user_config_file
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            tomli_w.dump(self.user_config, f)
        logging.info(f"The following user options were saved to {path}:")
        logging.info(self.user_config)


def _decode_error_position(error: tomllib.TOMLDecodeError):
    if getattr(error, "lineno", None) is not None:
        return error.lineno, error.colno
    match = re.search(r"at line (\d+), column (\d+)", str(error))
    if match:
        return int(match[1]), int(match[2])
    return None, None


def _table_lines(text: str, table: str):
    """Yield (line number, line) for every line belonging to `[table]`."""
    current = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = re.match(r"\s*\[([^\[\]]+)\]\s*(#.*)?$", line)
        if header:
            current = header[1].strip()
            continue
        if current == table:
            yield number, line


def _locate_key(text: str, table: str, key: str) -> int | None:
    """Line number on which `key` is assigned in `[table]`, if it can be found."""
    pattern = re.compile(rf"\s*{re.escape(key)}\s*=")
    for number, line in _table_lines(text, table):
        if pattern.match(line):
            return number
    return None


def _locate_value(text: str, table: str, key: str, value: str):
    """Line and column (1-based) where the string `value` starts after `key` in `[table]`."""
    start = _locate_key(text, table, key)
    if start is None:
        return None, None
    lines = text.splitlines()
    for number in range(start, len(lines) + 1):
        line = lines[number - 1]
        for quote in ('"', "'"):
            index = line.find(f"{quote}{value}{quote}")
            if index >= 0:
                return number, index + 2
    return start, None


def _parse_coefficient(table: dict, name: str, source: str, text: str) -> PiecewiseFn:
    for key in table:
        if key not in COEFFICIENT_KEYS:
            raise ConfigError(
                f"unknown key {key!r} in [problem.{name}]",
                source,
                _locate_key(text, f"problem.{name}", key),
            )
    breakpoints = table.get("breakpoints", [])
    branches = table.get("branches")
    if not isinstance(branches, list) or not all(isinstance(b, str) for b in branches):
        raise ConfigError(
            f"[problem.{name}] needs branches as a list of expression strings",
            source,
            _locate_key(text, f"problem.{name}", "branches"),
        )
    parsed = []
    for branch in branches:
        try:
            parsed.append(parse_expression(branch))
        except ExpressionError as error:
            line, column = _locate_value(text, f"problem.{name}", "branches", branch)
            if column is not None:
                column += len(branch.encode("utf-8")[: error.position].decode("utf-8", "ignore"))
            raise ConfigError(
                f"in [problem.{name}] branch {branch!r}: {error}", source, line, column
            ) from error
    try:
        return PiecewiseFn(breakpoints, parsed)
    except (SolverError, ValueError, TypeError) as error:
        raise ConfigError(
            f"invalid [problem.{name}]: {error}",
            source,
            _locate_key(text, f"problem.{name}", "breakpoints"),
        ) from error


def parse_problem(table: dict, source: str | None = None, text: str = "") -> SdeProblem:
    """Build the problem described by a `[problem]` table."""
    for key in table:
        if key not in PROBLEM_KEYS:
            raise ConfigError(
                f"unknown key {key!r} in [problem]", source, _locate_key(text, "problem", key)
            )
    overrides = {}
    for key in PROBLEM_OPTIONS:
        if key in table:
            value = table[key]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(
                    f"[problem] {key} should be a number, not {value!r}",
                    source,
                    _locate_key(text, "problem", key),
                )
            overrides[key] = float(value)

    if "example" in table:
        if "drift" in table or "diffusion" in table:
            raise ConfigError(
                "[problem] gives both an example and its own coefficients",
                source,
                _locate_key(text, "problem", "example"),
            )
        base = load_example(table["example"]).problem
        try:
            return base.with_overrides(**overrides)
        except ValueError as error:
            raise ConfigError(str(error), source) from error

    if "drift" not in table or "diffusion" not in table:
        raise ConfigError(
            "[problem] needs either an example or both [problem.drift] and [problem.diffusion]",
            source,
        )
    drift = _parse_coefficient(table["drift"], "drift", source, text)
    diffusion = _parse_coefficient(table["diffusion"], "diffusion", source, text)
    try:
        return SdeProblem(drift, diffusion, **overrides)
    except ValueError as error:
        raise ConfigError(str(error), source) from error


def load_config(
    path: Path, config: Config | None = None
) -> tuple[RunConfig, SdeProblem | None, dict]:
    """Read a run file with an optional `[run]` table and an optional `[problem]` table.

    Returns the run config (defaults merged with `[run]`), the problem if one is
    given, and the `[run]` options themselves.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = Config.load_config_toml(path)
    for table in data:
        if table not in ("run", "problem"):
            raise ConfigError(
                f"unknown table [{table}], expected [run] and/or [problem]",
                str(path),
                _locate_table(text, table),
            )
    overrides = dict(data.get("run", {}))
    check_options(overrides, "run", str(path), text)
    problem = None
    if "problem" in data:
        problem = parse_problem(data["problem"], str(path), text)

    if config is None:
        config = Config()
    options = {**config.options, **overrides}
    # x0, T and c_bar in [run] act on the problem
    run_config = RunConfig.from_options(
        options,
        example=data.get("problem", {}).get("example"),
        config_file=str(path),
    )
    logging.info(f"Run configuration loaded from: {path}")
    return run_config, problem, overrides


def _locate_table(text: str, table: str) -> int | None:
    for number, line in enumerate(text.splitlines(), start=1):
        if re.match(rf"\s*\[\s*{re.escape(table)}\s*[\].]", line):
            return number
    return None


def save_run_config(path: Path, run_config: RunConfig, problem: SdeProblem):
    """Write a run file that reproduces the run when given to `--config`."""
    run = {
        k: v
        for k, v in run_config.to_dict().items()
        if k not in (*PROBLEM_OPTIONS, "example", "config_file")
    }
    with open(path, "wb") as f:
        tomli_w.dump({"run": run, "problem": problem.to_dict()}, f)
    logging.info(f"Run configuration saved to {path}")
