"""Run configuration shared by the library entry points and the CLI.

Child seeds are derived from ``seed`` by fixed offsets::

    fold seed   = seed + 1
    level seed  = seed + 2
    sigma seed  = seed + 3   (bandwidth subsample)
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

FOLD_SEED_OFFSET = 1
LEVEL_SEED_OFFSET = 2
SIGMA_SEED_OFFSET = 3


@dataclass(frozen=True)
class RunConfig:
    # kernel
    alpha: float = 0.5
    sigma: float | str = "auto"
    gamma: float = 0.1
    kernel_mode: str = "dense"
    candidate_pool: int = 64
    memory_budget_gib: float = 2.0
    # density / penalty
    lambda_min: float | str = "auto"
    lambda_max: float | str = "auto"
    density_scales: tuple[int, ...] = (5, 10, 20)
    # solver
    tol: float = 1e-6
    max_sweeps: int = 300
    # consensus
    self_weight_scale: float = 1.0
    # index
    M: int = 16
    max_degree0: int | None = None
    ef_construction: int = 200
    ef_search: int = 1
    # evaluation
    folds: int = 10
    static_k: int = 5
    bruteforce_k: int = 1
    f1_mode: str = "macro_pr"
    seed: int = 0
    normalize: bool = False
    threads: int = 0

    def __post_init__(self):
        scales = self.density_scales
        if isinstance(scales, str):
            scales = [s for s in scales.split(",") if s.strip()]
        object.__setattr__(self, "density_scales", tuple(int(s) for s in scales))
        if self.kernel_mode not in ("dense", "local"):
            raise ValueError(f"kernel_mode must be 'dense' or 'local', got {self.kernel_mode!r}")
        if self.f1_mode not in ("macro_pr", "per_class"):
            raise ValueError(f"f1_mode must be 'macro_pr' or 'per_class', got {self.f1_mode!r}")
        for name in ("sigma", "lambda_min", "lambda_max"):
            v = getattr(self, name)
            if v != "auto":
                object.__setattr__(self, name, float(v))
        if self.candidate_pool < 1:
            raise ValueError("candidate_pool must be positive")

    @property
    def fold_seed(self) -> int:
        return self.seed + FOLD_SEED_OFFSET

    @property
    def level_seed(self) -> int:
        return self.seed + LEVEL_SEED_OFFSET

    @property
    def sigma_seed(self) -> int:
        return self.seed + SIGMA_SEED_OFFSET

    def to_dict(self) -> dict:
        d = asdict(self)
        d["density_scales"] = list(self.density_scales)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def updated(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Either a JSON object or ``key = value`` lines (``#`` starts a comment).

    In the line format, values are read as JSON when possible, so ``5``,
    ``0.1``, ``null``, ``true`` and ``[5, 10, 20]`` work; anything else is
    taken as a bare string (``auto``, ``local``).
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        data = json.loads(stripped)
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{source}:{lineno}: expected key = value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            data[key] = _parse_value(value)
    if not isinstance(data, dict):
        raise ValueError(f"{source}: config must be a JSON object or key = value lines")
    return RunConfig.from_dict(data)


def load_config(path) -> RunConfig:
    """Read a config file; unknown keys are rejected."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))
