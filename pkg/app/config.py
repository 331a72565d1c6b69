"""
Experiment configuration files.
- JSON documents validated by pydantic models
- parse errors report path:line:column, validation errors the dotted field path
- relative paths resolve against the config file's directory
Values left unset fall back to app.settings at run time.
"""
from __future__ import annotations
import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import ConfigError
from app.rng import U64_MAX

Seed = Annotated[int, Field(ge=0, le=U64_MAX)]
Matrix = List[List[float]]


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------- games

class QuadraticGameSpec(_Spec):
    kind: Literal["quadratic"]
    Q: Matrix
    r: List[float]
    upper: List[float]
    lower: Optional[List[float]] = None


class CournotGameSpec(_Spec):
    """Explicit data, a random instance (n_firms/n_markets), or preset="example1"."""
    kind: Literal["cournot"]
    preset: Optional[Literal["example1"]] = None
    variant: Literal["standard", "extreme"] = "standard"
    n_firms: Optional[int] = Field(None, ge=1)
    n_markets: Optional[int] = Field(None, ge=1)
    slope: float = 0.01
    participation: Optional[Matrix] = None
    price_intercepts: Optional[List[float]] = None
    price_slopes: Optional[List[float]] = None
    cost_quad: Optional[List[float]] = None
    cost_lin: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    lower: Optional[List[float]] = None
    normalize: bool = False
    seed: Optional[Seed] = None

    @model_validator(mode="after")
    def _one_source(self):
        explicit = self.price_intercepts is not None
        if self.preset is not None:
            return self
        if explicit:
            missing = [k for k in ("participation", "price_slopes", "cost_quad", "cost_lin", "upper")
                       if getattr(self, k) is None]
            if missing:
                raise ValueError(f"explicit Cournot data is missing {missing}")
            return self
        if self.n_firms is None or self.n_markets is None:
            raise ValueError("give preset, explicit market data, or n_firms and n_markets")
        return self


class RateControlGameSpec(_Spec):
    kind: Literal["rate_control"]
    preset: Optional[Literal["example2-default"]] = None
    incidence: Optional[Matrix] = None
    capacities: Optional[List[float]] = None
    capacity: float = Field(10.0, gt=0)
    kappa: float = Field(10.0, gt=0)
    chi: Optional[List[float]] = None
    chi_value: float = Field(10.0, gt=0)
    upper: Optional[List[float]] = None
    lower: Optional[List[float]] = None
    n_samples: int = Field(400, ge=1)
    sampling: Optional[Literal["omega", "fair_share"]] = None
    seed: Optional[Seed] = None

    @model_validator(mode="after")
    def _one_source(self):
        if self.preset is None and self.incidence is None:
            raise ValueError("give preset or incidence")
        return self


GameSpec = Annotated[Union[QuadraticGameSpec, CournotGameSpec, RateControlGameSpec], Field(discriminator="kind")]


class GameFile(BaseModel):
    game: GameSpec


# ---------- everything else

class GraphSpec(_Spec):
    preset: Optional[str] = None
    edge_list: Optional[str] = None
    n: Optional[int] = Field(None, ge=1)
    edges: Optional[List[Tuple[int, int]]] = None

    @model_validator(mode="after")
    def _one_source(self):
        given = [k for k in ("preset", "edge_list", "edges") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"exactly one of preset, edge_list, edges is required (got {given or 'none'})")
        if self.edges is not None and self.n is None:
            raise ValueError("n is required with inline edges")
        return self


class SolverSpec(_Spec):
    c: float = Field(1.0, gt=0)
    c0: Union[float, Literal["auto"]] = "auto"
    beta: Union[float, List[float], Literal["auto"]] = "auto"
    beta_margin: float = Field(1.01, gt=1.0)
    engine: Literal["agents", "stacked"] = "agents"
    threads: Optional[int] = Field(None, ge=1)


class InitSpec(_Spec):
    own_range: Optional[Tuple[float, float]] = None
    others_range: Tuple[float, float] = (0.0, 1.0)
    seed: Optional[Seed] = None


class StoppingSpec(_Spec):
    tol: Optional[float] = Field(None, gt=0)
    max_iter: Optional[int] = Field(None, ge=0)
    relative: bool = False


class OutputSpec(_Spec):
    csv: Optional[str] = None
    baseline_csv: Optional[str] = None
    record_every: Optional[int] = Field(None, ge=1)


class BaselineSpec(_Spec):
    a: Optional[float] = Field(None, gt=0)
    b: Optional[float] = Field(None, ge=1)
    gamma: Optional[float] = Field(None, gt=0)
    max_iter: Optional[int] = Field(None, ge=0)


class OracleSpec(_Spec):
    tau: Optional[float] = Field(None, gt=0)
    tol: float = Field(1e-12, gt=0)
    max_iter: int = Field(1_000_000, ge=1)


class ExperimentConfig(_Spec):
    mode: Literal["admm", "baseline", "oracle", "compare"] = "admm"
    seed: Optional[Seed] = None
    game: Optional[GameSpec] = None
    game_file: Optional[str] = None
    graph: Optional[GraphSpec] = None
    solver: SolverSpec = SolverSpec()
    init: InitSpec = InitSpec()
    stopping: StoppingSpec = StoppingSpec()
    output: OutputSpec = OutputSpec()
    baseline: BaselineSpec = BaselineSpec()
    oracle: OracleSpec = OracleSpec()

    @model_validator(mode="after")
    def _game_and_graph(self):
        if (self.game is None) == (self.game_file is None):
            raise ValueError("exactly one of game, game_file is required")
        if self.mode != "oracle" and self.graph is None:
            raise ValueError(f"mode {self.mode!r} needs a graph")
        return self


# ---------- loading

def _location(err: Dict[str, Any]) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError("file not found", location=str(path))
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, location=f"{path}:{e.lineno}:{e.colno}")


def _validate(model, data: Any, where: str):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], location=f"{where}:{_location(first)}")


def _resolve(base: Optional[Path], p: Optional[str], field: str) -> Optional[str]:
    if p is None:
        return None
    path = Path(p)
    if not path.is_absolute() and base is not None:
        path = base / path
    if not path.exists():
        raise ConfigError(f"referenced file does not exist: {path}", location=field)
    return str(path)


def _output_path(base: Optional[Path], p: Optional[str]) -> Optional[str]:
    if p is None or base is None or Path(p).is_absolute():
        return p
    return str(base / p)


def parse_config(data: Any, base_dir: Optional[Path] = None, where: str = "<config>") -> ExperimentConfig:
    cfg = _validate(ExperimentConfig, data, where)
    updates: Dict[str, Any] = {}
    if cfg.game_file is not None:
        updates["game_file"] = _resolve(base_dir, cfg.game_file, "game_file")
    if cfg.graph is not None and cfg.graph.edge_list is not None:
        updates["graph"] = cfg.graph.model_copy(
            update={"edge_list": _resolve(base_dir, cfg.graph.edge_list, "graph.edge_list")})
    updates["output"] = cfg.output.model_copy(update={
        "csv": _output_path(base_dir, cfg.output.csv),
        "baseline_csv": _output_path(base_dir, cfg.output.baseline_csv),
    })
    return cfg.model_copy(update=updates)


def load_config(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    return parse_config(_read_json(path), base_dir=path.parent, where=str(path))


def load_game_file(path: Path | str):
    """A game description file: {"game": {...}}."""
    path = Path(path)
    return _validate(GameFile, _read_json(path), str(path)).game


def with_overrides(
    cfg: ExperimentConfig,
    *,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    record_every: Optional[int] = None,
    threads: Optional[int] = None,
    mode: Optional[str] = None,
) -> ExperimentConfig:
    """Command-line values win over the file."""
    data = cfg.model_dump()
    if mode is not None:
        data["mode"] = mode
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["output"]["csv"] = out
    if tol is not None:
        data["stopping"]["tol"] = tol
    if max_iter is not None:
        data["stopping"]["max_iter"] = max_iter
    if record_every is not None:
        data["output"]["record_every"] = record_every
    if threads is not None:
        data["solver"]["threads"] = threads
    return _validate(ExperimentConfig, data, "<command line>")
