"""Persistence: run configuration (TOML), checkpoints (JSON header plus
length-prefixed float64 binary sections), and CSV/JSON exports."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:
    import tomli

from .network import ElmParams, ValueNetwork
from .problems import Domain, OcpInstance, make_problem
from .train import TrainConfig

CHECKPOINT_MAGIC = b"HJBFLOW1"
CHECKPOINT_VERSION = 1

_PROBLEM_KEYS = {
    "double_integrator": set(),
    "nonlinear_benchmark": set(),
    "pendulum": {"mass", "length", "inertia_com", "gravity", "q", "r_weight",
                 "torque_limit", "domain_lower", "domain_upper"},
    "detumbling": {"inertia", "q", "r", "domain_lower", "domain_upper"},
}

_TRAIN_KEYS = {
    "init_scale", "positivity_weight", "sampling_domain_scale",
    "num_points", "sampling", "init_mode", "ridge", "reg_weight", "adam_lr",
    "adam_epochs", "scheduler", "scheduler_patience", "scheduler_factor",
    "clip_norm", "lbfgs_iters", "lbfgs_memory", "policy_mode",
}
_NETWORK_KEYS = {"hidden", "seed", "weight_scale"}
_SIM_KEYS = {"dt", "t_max", "stop_tol"}
_OUTPUT_KEYS = {"prefix"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem_name: str
    problem_params: dict
    train: TrainConfig
    sim: dict
    output: dict

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "problem": {"name": self.problem_name, **self.problem_params},
            "network": {
                "hidden": self.train.hidden,
                "seed": self.train.seed,
                "weight_scale": self.train.weight_scale,
            },
            "train": {
                k: v for k, v in asdict(self.train).items()
                if k not in ("hidden", "seed", "weight_scale")
            },
            "sim": dict(self.sim),
            "output": dict(self.output),
        }


def _reject_unknown(section: str, given: dict, allowed: set) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(
            f"unknown keys in [{section}]: {sorted(unknown)}; allowed: {sorted(allowed)}")


def parse_run_config(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"config parse error: {e}") from e
    known_sections = {"problem", "network", "train", "sim", "output"}
    _reject_unknown("<top level>", doc, known_sections)
    if "problem" not in doc or "name" not in doc.get("problem", {}):
        raise ConfigError("config must contain a [problem] section with a name")

    prob = dict(doc["problem"])
    name = prob.pop("name")
    if name not in _PROBLEM_KEYS:
        raise ConfigError(f"unknown problem {name!r}; known: {sorted(_PROBLEM_KEYS)}")
    _reject_unknown("problem", prob, _PROBLEM_KEYS[name])

    net = dict(doc.get("network", {}))
    _reject_unknown("network", net, _NETWORK_KEYS)
    tr = dict(doc.get("train", {}))
    _reject_unknown("train", tr, _TRAIN_KEYS)
    sim = dict(doc.get("sim", {}))
    _reject_unknown("sim", sim, _SIM_KEYS)
    out = dict(doc.get("output", {}))
    _reject_unknown("output", out, _OUTPUT_KEYS)

    try:
        train_cfg = TrainConfig(**net, **tr)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid [train]/[network] settings: {e}") from e
    return RunConfig(problem_name=name, problem_params=prob, train=train_cfg,
                     sim=sim, output=out)


def load_run_config(path: str | Path) -> RunConfig:
    return parse_run_config(Path(path).read_text())


def build_problem(name: str, params: dict) -> OcpInstance:
    """Instantiate a registered problem from config-file parameters."""
    kwargs = dict(params)
    lo = kwargs.pop("domain_lower", None)
    hi = kwargs.pop("domain_upper", None)
    if (lo is None) != (hi is None):
        raise ConfigError("domain_lower and domain_upper must be given together")
    if lo is not None:
        kwargs["domain"] = Domain(np.asarray(lo, float), np.asarray(hi, float))
    for key in ("q", "r", "inertia"):
        if key in kwargs:
            kwargs[key] = np.asarray(kwargs[key], dtype=np.float64)
    return make_problem(name, **kwargs)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(x) for x in np.asarray(v).tolist()) + "]"
    raise TypeError(f"cannot serialize {type(v)} to config")


def dump_run_config(cfg: RunConfig) -> str:
    """Serialize the effective (defaults-merged) config back to TOML."""
    lines = []
    for section, values in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")
    return "\n".join(lines)


def save_checkpoint(path: str | Path, net: ValueNetwork, problem_name: str,
                    problem_params: dict, policy_mode: str,
                    train_config: Optional[dict] = None,
                    final_loss: Optional[float] = None) -> None:
    """Binary checkpoint: magic, u32 header length, JSON header, then W, b,
    beta as little-endian float64 runs (lengths recorded in the header)."""
    elm = net.elm
    arrays = [np.ascontiguousarray(a, dtype="<f8")
              for a in (elm.input_weights, elm.biases, net.beta)]
    header = {
        "format_version": CHECKPOINT_VERSION,
        "problem": problem_name,
        "problem_params": _jsonable(problem_params),
        "state_dim": elm.state_dim,
        "hidden": elm.hidden_count,
        "seed": elm.seed,
        "weight_scale": elm.weight_scale,
        "activation": elm.activation_tag,
        "policy_mode": policy_mode,
        "train_config": _jsonable(train_config or {}),
        "final_loss": final_loss,
        "section_bytes": [a.nbytes for a in arrays],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(a.tobytes())


def load_checkpoint(path: str | Path) -> tuple[ValueNetwork, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + hlen])
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('format_version')}")
    n, N = header["state_dim"], header["hidden"]
    sizes = header["section_bytes"]
    if sizes != [N * n * 8, N * 8, N * 8]:
        raise ValueError("checkpoint section sizes inconsistent with dimensions")
    off = 12 + hlen
    W = np.frombuffer(raw, dtype="<f8", count=N * n, offset=off).reshape(N, n)
    off += sizes[0]
    b = np.frombuffer(raw, dtype="<f8", count=N, offset=off)
    off += sizes[1]
    beta = np.frombuffer(raw, dtype="<f8", count=N, offset=off)
    elm = ElmParams(W.copy(), b.copy(), seed=header["seed"],
                    weight_scale=header["weight_scale"],
                    activation_tag=header["activation"])
    return ValueNetwork(elm, beta.copy()), header


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: str | Path, header: list[str], rows) -> None:
    """Full-precision CSV (17 significant digits) so values round-trip."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                format_float(v) if isinstance(v, (float, np.floating)) else str(v)
                for v in row) + "\n")


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def trajectory_rows(traj) -> tuple[list[str], list[list]]:
    n = traj.states.shape[1]
    m = traj.controls.shape[1]
    header = (["t"] + [f"x{i+1}" for i in range(n)] + [f"u{j+1}" for j in range(m)]
              + ["cost_so_far"])
    rows = [
        [float(traj.times[k]), *map(float, traj.states[k]),
         *map(float, traj.controls[k]), float(traj.cumulative_costs[k])]
        for k in range(len(traj.times))
    ]
    return header, rows
