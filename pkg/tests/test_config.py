from pathlib import Path

import pytest

from transformed_euler.solver import Config, ConfigError, RunConfig, load_config, load_example
from transformed_euler.solver.config import save_run_config


class TestConfig:
    test_dir = Path(__file__).parent
    mock_app = test_dir / "mock_app_config.toml"
    mock_user = test_dir / "mock_user_config.toml"

    def test_init_no_user(self, tmp_path):
        # Test if the defaults are set according to the (mock) app config
        config = Config(self.mock_app, tmp_path / "config.toml")
        assert config.options["paths"] == 16
        assert config.options["kappa"] == [0.0625]

    def test_no_user_config_created(self, tmp_path):
        new_user = tmp_path / "config.toml"
        Config(self.mock_app, new_user)
        assert not new_user.exists()

    def test_init_mock_user(self):
        # Test that options from a (mock) user config are loaded
        config = Config(self.mock_app, self.mock_user)
        assert config.options["paths"] == 32
        assert config.options["method"] == "both"
        # and missing ones filled from the defaults
        assert config.options["k_max"] == 5

    def test_save(self, tmp_path):
        config = Config(self.mock_app, self.mock_user)
        saved = tmp_path / "user" / "config.toml"
        config.save(saved)
        assert Config(self.mock_app, saved).options == config.options

    def test_unknown_user_option(self, tmp_path):
        user = tmp_path / "config.toml"
        user.write_text('[options]\npaths = 8\ncolour = "blue"\n', encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            Config(self.mock_app, user)
        assert info.value.line == 3

    def test_wrong_type(self, tmp_path):
        user = tmp_path / "config.toml"
        user.write_text('[options]\npaths = "many"\n', encoding="utf-8")
        with pytest.raises(ConfigError, match="paths"):
            Config(self.mock_app, user)

    def test_init_real_app(self, tmp_path):
        # Test config object creation using the packaged app config
        config = Config(user_config_file=tmp_path / "config.toml")
        run_config = config.run_config()
        assert run_config.kappa == (0.0625,)
        assert run_config.paths == 1024
        assert (run_config.k_min, run_config.k_max) == (4, 10)
        assert run_config.seed == 42

    def test_init_real_app_and_user(self):
        # Test config object creation using the system user config location
        Config()


class TestRunConfig:
    def test_defaults(self):
        run_config = RunConfig()
        assert run_config.methods() == [("emt", 1 / 16)]

    def test_both_methods(self):
        run_config = RunConfig(method="both", kappa=(1 / 16, 1 / 64, 1 / 256))
        assert run_config.methods() == [
            ("em", None),
            ("emt", 1 / 16),
            ("emt", 1 / 64),
            ("emt", 1 / 256),
        ]

    def test_kappa_out_of_range(self):
        with pytest.raises(ConfigError, match=r"kappa must be in \(0,1\)"):
            RunConfig(kappa=(1.5,))
        with pytest.raises(ConfigError, match=r"kappa must be in \(0,1\)"):
            RunConfig().with_overrides(kappa=[0.0])

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            RunConfig(paths=1)
        with pytest.raises(ConfigError):
            RunConfig(k_min=10, k_max=10)
        with pytest.raises(ConfigError):
            RunConfig(method="milstein")
        with pytest.raises(ConfigError):
            RunConfig(workers=0)

    def test_with_overrides_ignores_none(self):
        run_config = RunConfig().with_overrides(paths=64, seed=None)
        assert run_config.paths == 64
        assert run_config.seed == 42

    def test_to_dict(self):
        layout = RunConfig(x0=0.0).to_dict()
        assert layout["kappa"] == [1 / 16]
        assert layout["x0"] == 0.0
        assert "T" not in layout


class TestLoadConfig:
    test_dir = Path(__file__).parent
    mock_app = test_dir / "mock_app_config.toml"

    def config(self, tmp_path):
        return Config(self.mock_app, tmp_path / "config.toml")

    def write(self, tmp_path, text):
        path = tmp_path / "run.toml"
        path.write_text(text, encoding="utf-8")
        return path

    def test_problem_file_matches_example(self, tmp_path):
        run_config, problem, overrides = load_config(
            self.test_dir / "ex1_problem.toml", self.config(tmp_path)
        )
        assert problem == load_example("ex1").problem
        assert run_config.method == "em"
        assert run_config.paths == 8
        assert run_config.seed == 7
        assert overrides == {"method": "em", "paths": 8, "k_min": 2, "k_max": 4}

    def test_example_table(self, tmp_path):
        path = self.write(tmp_path, '[problem]\nexample = "ex2"\nx0 = -0.25\n')
        run_config, problem, _ = load_config(path, self.config(tmp_path))
        assert problem.drift == load_example("ex2").problem.drift
        assert problem.x0 == -0.25
        assert run_config.example == "ex2"

    def test_run_only(self, tmp_path):
        path = self.write(tmp_path, "[run]\nkappa = 0.015625\n")
        run_config, problem, _ = load_config(path, self.config(tmp_path))
        assert problem is None
        assert run_config.kappa == (0.015625,)

    def test_kappa_out_of_range(self, tmp_path):
        path = self.write(tmp_path, "[run]\nkappa = 1.5\n")
        with pytest.raises(ConfigError, match=r"kappa must be in \(0,1\)"):
            load_config(path, self.config(tmp_path))

    def test_malformed_expression(self, tmp_path):
        path = self.write(
            tmp_path,
            "[problem.drift]\n"
            "breakpoints = [0.0]\n"
            'branches = ["1", "-1 +* x"]\n'
            "\n"
            "[problem.diffusion]\n"
            'branches = ["1"]\n',
        )
        with pytest.raises(ConfigError) as info:
            load_config(path, self.config(tmp_path))
        assert info.value.line == 3
        assert info.value.column == 23
        assert "run.toml:3:23" in str(info.value)

    def test_unknown_key(self, tmp_path):
        path = self.write(tmp_path, "[run]\npaths = 8\nsteps = 4\n")
        with pytest.raises(ConfigError, match="steps") as info:
            load_config(path, self.config(tmp_path))
        assert info.value.line == 3

    def test_unknown_problem_key(self, tmp_path):
        path = self.write(
            tmp_path,
            "[problem.drift]\n"
            "breakpoints = []\n"
            'branches = ["1"]\n'
            'shape = "flat"\n'
            "\n"
            "[problem.diffusion]\n"
            'branches = ["1"]\n',
        )
        with pytest.raises(ConfigError, match="shape") as info:
            load_config(path, self.config(tmp_path))
        assert info.value.line == 4

    def test_unknown_table(self, tmp_path):
        path = self.write(tmp_path, "[run]\npaths = 8\n\n[plot]\nwidth = 3\n")
        with pytest.raises(ConfigError) as info:
            load_config(path, self.config(tmp_path))
        assert info.value.line == 4

    def test_toml_syntax_error(self, tmp_path):
        path = self.write(tmp_path, "[run]\npaths = = 8\n")
        with pytest.raises(ConfigError) as info:
            load_config(path, self.config(tmp_path))
        assert info.value.line == 2

    def test_example_and_coefficients(self, tmp_path):
        path = self.write(
            tmp_path,
            '[problem]\nexample = "ex1"\n\n[problem.drift]\nbranches = ["1"]\n\n[problem.diffusion]\nbranches = ["1"]\n',
        )
        with pytest.raises(ConfigError, match="both an example"):
            load_config(path, self.config(tmp_path))

    def test_bad_breakpoints(self, tmp_path):
        path = self.write(
            tmp_path,
            "[problem.drift]\nbreakpoints = [1.0, 0.0]\nbranches = [\"1\", \"2\", \"3\"]\n\n"
            '[problem.diffusion]\nbranches = ["1"]\n',
        )
        with pytest.raises(ConfigError, match="unordered") as info:
            load_config(path, self.config(tmp_path))
        assert info.value.line == 2

    def test_saved_run_config_reproduces_run(self, tmp_path):
        run_config, problem, _ = load_config(
            self.test_dir / "ex1_problem.toml", self.config(tmp_path)
        )
        saved = tmp_path / "run_config.toml"
        save_run_config(saved, run_config, problem)
        reloaded, reloaded_problem, _ = load_config(saved, self.config(tmp_path))
        assert reloaded_problem == problem
        assert reloaded.with_overrides(config_file=run_config.config_file) == run_config
