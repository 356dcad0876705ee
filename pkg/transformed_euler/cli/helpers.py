import json
import logging
import math
from pathlib import Path

import numpy as np

from ..solver import (
    Config,
    ConfigError,
    RunConfig,
    SdeProblem,
    TransformedSde,
    consecutive_l2_errors,
    load_config,
    load_example,
    simulate_terminals,
    validate_assumptions,
)
from ..solver.config import PROBLEM_OPTIONS, save_run_config
from ..solver.examples import EXAMPLE_T, EXAMPLE_X0

TRANSFORM_COLUMNS = (
    "x",
    "g",
    "g_prime",
    "g_second_left",
    "g_second_right",
    "mu",
    "sigma",
    "mu_tilde",
    "sigma_tilde",
)
ERROR_COLUMNS = ("method", "kappa", "level", "delta", "l2_error", "paths", "seed")
TERMINAL_COLUMNS = ("path", "terminal")
# These only decide how a run is spread over threads, never its results, so they are
# left out of CSV headers to keep the files identical between machines
EXECUTION_OPTIONS = ("out", "workers", "chunk_size", "config_file")


class TerminalProgress:
    def __init__(self, label: str = "Progress"):
        self.label = label
        self._value = 0
        self._max = 0

    def setValue(self, value):
        self._value = value
        self.print_progress()

    def setMaximum(self, max):
        self._max = max

    def maximum(self):
        return self._max

    def __call__(self, done, total):
        """Use as a progress callback of the harness."""
        self.setMaximum(total)
        self.setValue(done)

    def print_progress(self):
        try:
            print(f"{self.label}: {int((self._value / self._max) * 100)}%")
        except ZeroDivisionError:
            print(f"{self.label}: 100%")


def setup_run(
    config_file: Path | None = None,
    example: str | None = None,
    user_config_file: Path | None = None,
    save_options: bool = False,
    **overrides,
) -> tuple[RunConfig, SdeProblem]:
    """Combine packaged defaults, user config, run file and command-line overrides.

    An example given directly takes precedence over the problem of the run file.
    With `save_options` the command-line run options are also stored in the user
    config, to become the defaults of later runs.
    """
    logging.info("Loading program settings...")
    config = Config(user_config_file=user_config_file)
    if config_file is not None:
        run_config, problem, _ = load_config(Path(config_file), config)
    else:
        run_config, problem = config.run_config(), None
    run_config = run_config.with_overrides(example=example, **overrides)
    if save_options:
        save_user_options(config, overrides)
    logging.info("...complete")

    if example is not None:
        problem = load_example(example).problem
    if problem is None:
        raise ConfigError(
            "no problem given: pass --example or a --config file with a [problem] table"
        )
    try:
        problem = problem.with_overrides(
            x0=run_config.x0, T=run_config.T, c_bar=run_config.c_bar
        )
    except ValueError as error:
        raise ConfigError(str(error)) from error
    return run_config, problem


def save_user_options(config: Config, overrides: dict):
    """Write the given run options (not the problem-specific ones) to the user config."""
    options = {
        k: list(v) if isinstance(v, tuple) else v
        for k, v in overrides.items()
        if v is not None and k not in PROBLEM_OPTIONS
    }
    config.options.update(options)
    config.save()
    saved = ", ".join(options) or "no options"
    logging.info(f"Saved {saved} as user defaults")


def assumed_defaults(run_config: RunConfig, problem: SdeProblem) -> dict:
    """Values used for built-in examples that are not part of the example definitions.

    A value counts as assumed unless the command line or the run file changed it.
    """
    if run_config.example is None:
        return {}
    assumed = {}
    if run_config.x0 is None and problem.x0 == EXAMPLE_X0:
        assumed["x0"] = EXAMPLE_X0
    if run_config.T is None and problem.T == EXAMPLE_T:
        assumed["T"] = EXAMPLE_T
    return assumed


def metadata(command: str, run_config: RunConfig, problem: SdeProblem, **extra) -> dict:
    """The full effective configuration of a run, embedded in every output."""
    settings = {
        k: v for k, v in run_config.to_dict().items() if k not in EXECUTION_OPTIONS
    }
    return {
        "command": command,
        "config": settings,
        "problem": problem.to_dict(),
        "assumed_defaults": assumed_defaults(run_config, problem),
        **extra,
    }


def prepare_output(run_config: RunConfig, problem: SdeProblem) -> Path:
    out = Path(run_config.out)
    out.mkdir(parents=True, exist_ok=True)
    save_run_config(out / "run_config.toml", run_config, problem)
    return out


def write_csv(path: Path, header: dict, columns, write_rows):
    """Write `#`-prefixed JSON metadata lines, the column names, then the rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for key, value in header.items():
            f.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        f.write(",".join(columns) + "\n")
        write_rows(f)
    logging.info(f"Wrote {path}")


def write_json(path: Path, content: dict):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(content, f, indent=2, sort_keys=True)
        f.write("\n")
    logging.info(f"Wrote {path}")


def _suffix(method: str, kappa: float | None, single: bool) -> str:
    if single:
        return ""
    if kappa is None:
        return f"_{method}"
    return f"_{method}_kappa{kappa:g}"


def cmd_transform(run_config: RunConfig, problem: SdeProblem) -> list[Path]:
    """Sample g, its derivatives and both sets of coefficients to transform_dump.csv."""
    report = validate_assumptions(problem)
    out = prepare_output(run_config, problem)
    written = []
    for kappa in run_config.kappa:
        model = TransformedSde.build(problem, kappa)
        samples = model.samples(run_config.samples)
        lipschitz = model.lipschitz_estimates()
        logging.info(
            f"Estimated Lipschitz constants for kappa = {kappa:g}: "
            f"mu~ {lipschitz['mu_tilde']:.6g}, sigma~ {lipschitz['sigma_tilde']:.6g}"
        )
        bumps = [
            {
                "xi": b.xi,
                "alpha": b.alpha,
                "beta": b.beta,
                "mu_bar": b.mu_bar,
                "d_left": b.d_left,
                "d_right": b.d_right,
            }
            for b in model.transform.bumps
        ]
        header = metadata(
            "transform",
            run_config,
            problem,
            kappa=kappa,
            bumps=bumps,
            lipschitz_estimates=lipschitz,
            sigma_squared_at_breakpoints=[[xi, s] for xi, s in report.sigma_squared.items()],
        )
        data = np.column_stack([samples[column] for column in TRANSFORM_COLUMNS])
        path = out / f"transform_dump{_suffix('emt', kappa, len(run_config.kappa) == 1)}.csv"
        write_csv(
            path,
            header,
            TRANSFORM_COLUMNS,
            lambda f: np.savetxt(f, data, fmt="%.17g", delimiter=","),
        )
        written.append(path)
    return written


def cmd_convergence(
    run_config: RunConfig, problem: SdeProblem, progress=None
) -> list[Path]:
    """Consecutive L2 errors for every requested method and kappa, plus fitted orders."""
    combinations = run_config.methods()
    if any(method == "emt" for method, _ in combinations):
        validate_assumptions(problem)
    out = prepare_output(run_config, problem)

    reports = []
    for method, kappa in combinations:
        reports.append(
            consecutive_l2_errors(
                problem,
                method,
                kappa,
                run_config.seed,
                run_config.paths,
                run_config.k_min,
                run_config.k_max,
                workers=run_config.workers,
                chunk_size=run_config.chunk_size,
                progress_callback=progress,
            )
        )

    def rows(f):
        for report in reports:
            kappa = "" if report.kappa is None else repr(report.kappa)
            for level in report.levels:
                f.write(
                    f"{report.method},{kappa},{level.k},{level.delta!r},"
                    f"{level.error!r},{report.paths},{report.seed}\n"
                )

    errors_csv = out / "errors.csv"
    write_csv(errors_csv, metadata("convergence", run_config, problem), ERROR_COLUMNS, rows)

    summary_json = out / "summary.json"
    write_json(
        summary_json,
        {
            **metadata("convergence", run_config, problem),
            "execution": {"workers": run_config.workers, "chunk_size": run_config.chunk_size},
            "fitted_orders": [
                {"method": r.method, "kappa": r.kappa, "fitted_order": _finite_or_none(r.fitted_order)}
                for r in reports
            ],
            "reports": [_json_safe(r.to_dict()) for r in reports],
        },
    )
    for report in reports:
        label = report.method if report.kappa is None else f"{report.method} (kappa {report.kappa:g})"
        print(f"Fitted order {label}: {report.fitted_order:.4f}")
    return [errors_csv, summary_json]


def cmd_simulate(run_config: RunConfig, problem: SdeProblem, progress=None) -> list[Path]:
    """Terminal values of every path at the configured level, one file per method."""
    combinations = run_config.methods()
    if any(method == "emt" for method, _ in combinations):
        validate_assumptions(problem)
    out = prepare_output(run_config, problem)

    written = []
    summaries = []
    for method, kappa in combinations:
        terminals = simulate_terminals(
            problem,
            method,
            kappa,
            run_config.seed,
            run_config.paths,
            run_config.level,
            run_config.level,
            workers=run_config.workers,
            chunk_size=run_config.chunk_size,
            progress_callback=progress,
        )[:, 0]
        mean = math.fsum(terminals) / terminals.size
        stderr = float(np.std(terminals, ddof=1) / math.sqrt(terminals.size))
        summaries.append(
            {"method": method, "kappa": kappa, "mean": mean, "stderr": stderr, "paths": terminals.size}
        )
        logging.info(f"Sample mean for {method}: {mean:.6g} ± {stderr:.2g}")

        data = np.column_stack([np.arange(terminals.size), terminals])
        header = metadata("simulate", run_config, problem, method=method, kappa=kappa)
        path = out / f"terminals{_suffix(method, kappa, len(combinations) == 1)}.csv"
        write_csv(
            path,
            header,
            TERMINAL_COLUMNS,
            lambda f: np.savetxt(f, data, fmt=["%d", "%.17g"], delimiter=","),
        )
        written.append(path)

    summary_json = out / "simulate_summary.json"
    write_json(
        summary_json,
        {
            **metadata("simulate", run_config, problem),
            "delta": problem.T * 2.0**-run_config.level,
            "samples": summaries,
        },
    )
    written.append(summary_json)
    return written


def _finite_or_none(value: float):
    return value if math.isfinite(value) else None


def _json_safe(content):
    """Replace NaN and infinities, which are not valid JSON, by None."""
    if isinstance(content, dict):
        return {k: _json_safe(v) for k, v in content.items()}
    if isinstance(content, list):
        return [_json_safe(v) for v in content]
    if isinstance(content, float):
        return _finite_or_none(content)
    return content
