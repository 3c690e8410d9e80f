"""Run configuration: one flat key=value namespace shared by all commands.

Precedence is built-in defaults < config file < command-line flags, and the
effective configuration is echoed into every output artifact.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass
class RunConfig:
    # geometry / data
    width: int = 64
    height: int = 64
    clip_frames: int = 81  # raw clip length before sparse sampling
    profile: str = "varied"  # per-clip rotation through the motion profiles
    # model
    patch: int = 4
    dim: int = 128
    heads: int = 4
    blocks: int = 6
    mlp_ratio: float = 4.0
    # frame layout
    n_frames: int = 9  # model sequence length incl. conditioning frame 0
    n_extension: int = 2  # final timesteps occupied by the duplicated target view
    sparse_source_len: int = 81
    # objective / training
    alpha: float = 1.0
    gamma: float = 0.01
    lr: float = 1e-4
    batch_size: int = 2
    iterations: int = 2000
    sample_steps: int = 20
    seed: int = 0
    mode: str = "scratch"  # or "anchor_only"
    dataset: str = ""
    init_from: str = ""
    checkpoint_every: int = 500
    log_every: int = 10
    # ablations
    disable_guidance: bool = False
    disable_anchor: bool = False
    disable_tegs: bool = False
    intermediate_weights_zero: bool = False

    def __post_init__(self):
        if self.mode not in ("scratch", "anchor_only"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if not 1 <= self.n_extension < self.n_frames:
            raise ValueError(f"need 1 <= n_extension < n_frames, got "
                             f"{self.n_extension} / {self.n_frames}")
        if self.n_frames - self.n_extension + 1 > self.sparse_source_len:
            raise ValueError("frame layout needs more unique frames than "
                             "sparse_source_len provides")

    @property
    def n_unique(self) -> int:
        """Unique trajectory frames before the endpoint duplication."""
        return self.n_frames - (self.n_extension - 1)

    @property
    def effective_gamma(self) -> float:
        return 0.0 if self.disable_tegs else self.gamma

    def to_text(self) -> str:
        lines = [f"{f.name}={_fmt(getattr(self, f.name))}"
                 for f in dataclasses.fields(self)]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(name: str, text: str, target_type):
    text = text.strip()
    if target_type is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {name}={text!r}")
    try:
        return target_type(text)
    except ValueError as exc:
        raise ValueError(f"cannot parse {name}={text!r} as {target_type.__name__}") from exc


def parse_config_text(text: str) -> dict:
    """Parse 'key=value' lines ('#' comments) into typed overrides."""
    defaults = RunConfig()
    concrete = {f.name: type(getattr(defaults, f.name))
                for f in dataclasses.fields(RunConfig)}
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in concrete:
            raise ValueError(f"line {ln}: unknown config key {key!r}")
        out[key] = _parse_value(key, value, concrete[key])
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then config-file values, then explicit overrides."""
    values = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def config_from_text(text: str) -> RunConfig:
    return RunConfig(**parse_config_text(text))
