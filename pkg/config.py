"""Configuration management for orthoglass experiments."""
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from typing import Any, Dict, Optional
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from errors import ConfigError, NumericDomainError
from models import ExperimentConfig, ModelSpec
from spectral_law import field_law_from_dict, spectral_law_from_dict, standardize

VERSION = "0.3.0"

COMMANDS = ("rs", "se", "amp", "enumerate", "sphere", "hciz", "validate")
RANDOMIZED_COMMANDS = ("amp", "enumerate", "sphere", "hciz", "validate")
PLACEMENTS = ("quantile", "iid")
FORMATS = ("json", "csv")

TOP_LEVEL_KEYS = {
    "command", "model", "n_list", "t_max", "replicates", "seed", "placement",
    "tolerances", "output", "hciz", "acceptance",
}
MODEL_KEYS = {"beta", "spectral", "field"}
OUTPUT_KEYS = {"path", "format"}
HCIZ_KEYS = {"n", "alpha", "b_scale", "draws", "epsilon"}
ACCEPTANCE_KEYS = {
    "amp_n", "amp_T", "amp_seeds", "amp_beta", "amp_h",
    "enumerate_n_list", "enumerate_replicates", "enumerate_beta", "enumerate_h",
    "sphere_n", "sphere_draws", "sphere_beta", "sphere_sd",
    "hciz_n", "hciz_draws", "stationary_t_max", "infgamma_draws",
}

DEFAULT_TOLERANCES = {
    "transform": 1e-8,
    "rs_identity": 1e-8,
    "phi1_value": 1e-8,
    "phi2_value": 1e-7,
    "partials": 1e-8,
    "infgamma_scalar": 1e-8,
    "infgamma_matrix": 1e-6,
    "se_gram": 0.05,
    "freeness": 0.1,
    "enumerate_gap": 0.02,
    "sphere_gap": 0.01,
    "hciz_warn": 0.05,
    "hciz_fail": 0.15,
    "oracle": 1e-10,
}

DEFAULT_ACCEPTANCE = {
    "amp_n": 4000, "amp_T": 6, "amp_seeds": 8, "amp_beta": 0.1, "amp_h": 0.4,
    "enumerate_n_list": [12, 16, 20], "enumerate_replicates": 32,
    "enumerate_beta": 0.1, "enumerate_h": 0.3,
    "sphere_n": 2000, "sphere_draws": 8, "sphere_beta": 0.3, "sphere_sd": 0.5,
    "hciz_n": 400, "hciz_draws": 400000,
    "stationary_t_max": 8, "infgamma_draws": 20,
}

DEFAULT_HCIZ = {"n": 400, "alpha": 0.8, "b_scale": 0.1, "draws": 400000, "epsilon": None}


@dataclass
class Config:
    """Runtime settings loaded from environment variables."""

    # Quadrature
    gh_order: int = 60
    field_order: int = 40
    spectral_nodes: int = 400

    # Execution
    threads: int = 4
    mc_chunk: int = 20000

    # Output
    output_dir: str = "./outputs"
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "Config":
        """Load configuration from environment variables."""
        return cls(
            gh_order=int(os.getenv("ORTHOGLASS_GH_ORDER", "60")),
            field_order=int(os.getenv("ORTHOGLASS_FIELD_ORDER", "40")),
            spectral_nodes=int(os.getenv("ORTHOGLASS_SPECTRAL_NODES", "400")),
            threads=int(os.getenv("ORTHOGLASS_THREADS", "4")),
            mc_chunk=int(os.getenv("ORTHOGLASS_MC_CHUNK", "20000")),
            output_dir=os.getenv("ORTHOGLASS_OUTPUT_DIR", "./outputs"),
            log_level=os.getenv("ORTHOGLASS_LOG_LEVEL", "INFO"),
        )

    def ensure_directories(self) -> None:
        """Create the output directory if it doesn't exist."""
        os.makedirs(self.output_dir, exist_ok=True)


def config_hash(raw: Dict[str, Any]) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(condition: bool, message: str, field: str) -> None:
    if not condition:
        raise ConfigError(message, field=field)


def _reject_unknown(section: Dict[str, Any], allowed: set, path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        prefix = f"{path}." if path else ""
        raise ConfigError(f"unknown key '{sorted(unknown)[0]}'", field=f"{prefix}{sorted(unknown)[0]}")


def _as_int(value: Any, field: str, minimum: int = 0) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), "expected an integer", field)
    _require(value >= minimum, f"must be >= {minimum}", field)
    return value


def parse_experiment_config(raw: Dict[str, Any], field_order: int = 40,
                            spectral_nodes: int = 400) -> ExperimentConfig:
    """Validate a decoded experiment object and build an ExperimentConfig."""
    _require(isinstance(raw, dict), "top level must be an object", "<root>")
    _reject_unknown(raw, TOP_LEVEL_KEYS, "")

    command = raw.get("command")
    _require(command in COMMANDS, f"command must be one of {list(COMMANDS)}", "command")

    model_raw = raw.get("model")
    _require(isinstance(model_raw, dict), "model section is required", "model")
    _reject_unknown(model_raw, MODEL_KEYS, "model")
    beta = model_raw.get("beta")
    _require(isinstance(beta, (int, float)) and not isinstance(beta, bool) and beta > 0,
             "beta must be a positive number", "model.beta")
    _require("spectral" in model_raw, "spectral law is required", "model.spectral")
    law = spectral_law_from_dict(model_raw["spectral"], "model.spectral")
    field_law = field_law_from_dict(model_raw.get("field", {"type": "point_mass", "h": 0.0}),
                                    "model.field", default_order=field_order)

    standardized = standardize(law)
    try:
        model = ModelSpec(standardized.effective_beta(float(beta)), standardized.law, field_law, spectral_nodes)
    except NumericDomainError as e:
        raise ConfigError(str(e), field="model.beta") from e

    seed = raw.get("seed")
    if seed is not None:
        _require(isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2 ** 64,
                 "seed must be an unsigned 64-bit integer", "seed")
    if command in RANDOMIZED_COMMANDS:
        _require(seed is not None, f"seed is mandatory for command '{command}'", "seed")

    n_list = raw.get("n_list", [])
    _require(isinstance(n_list, list), "n_list must be a list", "n_list")
    n_list = [_as_int(n, f"n_list[{i}]", minimum=1) for i, n in enumerate(n_list)]

    placement = raw.get("placement", "quantile")
    _require(placement in PLACEMENTS, f"placement must be one of {list(PLACEMENTS)}", "placement")

    tolerances = dict(DEFAULT_TOLERANCES)
    tol_raw = raw.get("tolerances", {})
    _require(isinstance(tol_raw, dict), "tolerances must be an object", "tolerances")
    _reject_unknown(tol_raw, set(DEFAULT_TOLERANCES), "tolerances")
    for key, value in tol_raw.items():
        _require(isinstance(value, (int, float)) and value > 0, "tolerance must be positive",
                 f"tolerances.{key}")
        tolerances[key] = float(value)

    output = raw.get("output", {})
    _require(isinstance(output, dict), "output must be an object", "output")
    _reject_unknown(output, OUTPUT_KEYS, "output")
    output_format = output.get("format", "json")
    _require(output_format in FORMATS, f"format must be one of {list(FORMATS)}", "output.format")

    hciz = dict(DEFAULT_HCIZ)
    hciz_raw = raw.get("hciz", {})
    _require(isinstance(hciz_raw, dict), "hciz must be an object", "hciz")
    _reject_unknown(hciz_raw, HCIZ_KEYS, "hciz")
    hciz.update(hciz_raw)

    acceptance = dict(DEFAULT_ACCEPTANCE)
    acc_raw = raw.get("acceptance", {})
    _require(isinstance(acc_raw, dict), "acceptance must be an object", "acceptance")
    _reject_unknown(acc_raw, ACCEPTANCE_KEYS, "acceptance")
    acceptance.update(acc_raw)

    return ExperimentConfig(
        command=command,
        model=model,
        raw=raw,
        seed=seed,
        n_list=n_list,
        t_max=_as_int(raw.get("t_max", 8), "t_max", minimum=1),
        replicates=_as_int(raw.get("replicates", 1), "replicates", minimum=1),
        placement=placement,
        tolerances=tolerances,
        output_path=output.get("path"),
        output_format=output_format,
        hciz=hciz,
        acceptance=acceptance,
        shift=standardized.shift,
        scale=standardized.scale,
    )


def load_experiment_config(path: str, settings: Optional[Config] = None,
                           overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read and validate an experiment JSON file; ``overrides`` replace top-level keys."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    if isinstance(raw, dict) and overrides:
        raw = {**raw, **overrides}
    settings = settings or Config.from_env()
    return parse_experiment_config(raw, settings.field_order, settings.spectral_nodes)
