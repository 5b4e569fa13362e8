"""Run configuration: INI file with nested sections, plus defaults.

Only the output directory and thread count may be overridden from the
environment (STAGHEIS_OUT, STAGHEIS_THREADS); everything else comes from
the file or the command line.
"""

import configparser
import os
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Unparseable or inconsistent run configuration."""


@dataclass
class RunConfig:
    d: int = 1
    L_list: list = field(default_factory=lambda: [1, 2, 3])
    S: float = 0.5
    B_list: list = field(default_factory=lambda: [0.1, 0.5])
    beta_list: list = field(default_factory=lambda: [1.0])
    zero_temperature: bool = True
    R_list: list = field(default_factory=lambda: [1])
    epsilon_list: list = field(default_factory=lambda: [0.0, 0.1])
    scaling_R_list: list = field(default_factory=lambda: [4, 8, 16, 32])
    scenarios: list = field(default_factory=list)   # empty = all
    out_dir: str = "runs/latest"
    seed: int = 20240901
    threads: int = 1
    dense_cap: int = 4096
    state_bits_cap: int = 18
    n_random_trials: int = 16
    n_field_samples: int = 40
    plots: bool = True
    corrupt_hamiltonian: bool = False
    tolerance_overrides: dict = field(default_factory=dict)

    def validate(self):
        if self.d < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.d}")
        if not self.L_list:
            raise ConfigError("L_list must not be empty")
        if any(L < 1 for L in self.L_list):
            raise ConfigError(f"half side lengths must be >= 1: {self.L_list}")
        two_s = 2.0 * self.S
        if two_s <= 0 or abs(two_s - round(two_s)) > 1e-12:
            raise ConfigError(f"S must be a positive half-integer, got {self.S}")
        if any(b <= 0 for b in self.beta_list):
            raise ConfigError(f"inverse temperatures must be positive: "
                              f"{self.beta_list}")
        if any(e < 0 or e >= 0.5 for e in self.epsilon_list):
            raise ConfigError(f"exponents must lie in [0, 1/2): "
                              f"{self.epsilon_list}")
        if any(r < 1 for r in self.R_list + self.scaling_R_list):
            raise ConfigError("radii must be >= 1")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        return self

    def apply_environment(self):
        out = os.environ.get("STAGHEIS_OUT")
        if out:
            self.out_dir = out
        threads = os.environ.get("STAGHEIS_THREADS")
        if threads:
            try:
                self.threads = int(threads)
            except ValueError as exc:
                raise ConfigError(f"STAGHEIS_THREADS={threads!r}") from exc
        return self

    def to_dict(self):
        return {
            "d": self.d, "L_list": self.L_list, "S": self.S,
            "B_list": self.B_list, "beta_list": self.beta_list,
            "zero_temperature": self.zero_temperature,
            "R_list": self.R_list, "epsilon_list": self.epsilon_list,
            "scaling_R_list": self.scaling_R_list,
            "scenarios": self.scenarios, "out_dir": self.out_dir,
            "seed": self.seed, "threads": self.threads,
            "dense_cap": self.dense_cap,
            "state_bits_cap": self.state_bits_cap,
            "n_random_trials": self.n_random_trials,
            "n_field_samples": self.n_field_samples,
            "plots": self.plots,
            "corrupt_hamiltonian": self.corrupt_hamiltonian,
            "tolerance_overrides": self.tolerance_overrides,
        }


def _floats(raw):
    return [float(tok) for tok in raw.replace(",", " ").split()]


def _ints(raw):
    return [int(tok) for tok in raw.replace(",", " ").split()]


def load_config(path=None):
    """Parse an INI run configuration; None gives the defaults."""
    cfg = RunConfig()
    if path is None:
        return cfg.validate()
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    try:
        if parser.has_section("lattice"):
            sec = parser["lattice"]
            cfg.d = sec.getint("d", cfg.d)
            if "L_list" in sec:
                cfg.L_list = _ints(sec["L_list"])
            cfg.S = sec.getfloat("S", cfg.S)
        if parser.has_section("fields"):
            sec = parser["fields"]
            if "B_list" in sec:
                cfg.B_list = _floats(sec["B_list"])
            if "beta_list" in sec:
                cfg.beta_list = _floats(sec["beta_list"])
            cfg.zero_temperature = sec.getboolean("zero_temperature",
                                                  cfg.zero_temperature)
        if parser.has_section("regions"):
            sec = parser["regions"]
            if "R_list" in sec:
                cfg.R_list = _ints(sec["R_list"])
            if "epsilon_list" in sec:
                cfg.epsilon_list = _floats(sec["epsilon_list"])
            if "scaling_R_list" in sec:
                cfg.scaling_R_list = _ints(sec["scaling_R_list"])
        if parser.has_section("scenarios"):
            sec = parser["scenarios"]
            if "select" in sec:
                cfg.scenarios = sec["select"].replace(",", " ").split()
        if parser.has_section("run"):
            sec = parser["run"]
            cfg.out_dir = sec.get("out_dir", cfg.out_dir)
            cfg.seed = sec.getint("seed", cfg.seed)
            cfg.threads = sec.getint("threads", cfg.threads)
            cfg.dense_cap = sec.getint("dense_cap", cfg.dense_cap)
            cfg.state_bits_cap = sec.getint("state_bits_cap",
                                            cfg.state_bits_cap)
            cfg.n_random_trials = sec.getint("n_random_trials",
                                             cfg.n_random_trials)
            cfg.n_field_samples = sec.getint("n_field_samples",
                                             cfg.n_field_samples)
            cfg.plots = sec.getboolean("plots", cfg.plots)
        if parser.has_section("tolerances"):
            cfg.tolerance_overrides = {
                k: float(v) for k, v in parser["tolerances"].items()}
        if parser.has_section("debug"):
            cfg.corrupt_hamiltonian = parser["debug"].getboolean(
                "corrupt_hamiltonian", cfg.corrupt_hamiltonian)
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad config {path!r}: {exc}") from exc
    return cfg.validate()
