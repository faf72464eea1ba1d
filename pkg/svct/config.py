"""INI configuration loading.

One section per model ([pipeline], [network], [train.sin], [train.prn],
[fista], [fista.grid]). Values are strings handed to pydantic, which does
the typed coercion and range checks. Overrides have the form
"section.key=value" and win over the file; the file wins over model
defaults. Nested models inside a train section are addressed with a
prefix: weights.content, augmentation.rotation_deg.
"""

import configparser
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from svct.errors import ConfigError
from svct.models import FistaConfig, NetworkConfig, PipelineConfig, TrainConfig

DATA_DIR = Path(__file__).parent.parent / "data"
DEFAULT_CONFIG = DATA_DIR / "desk.ini"
FISTA_GRID_CONFIG = DATA_DIR / "fista_grid.ini"


class FistaGrid(BaseModel):
    tv_weights: list[float] = Field(default_factory=lambda: [10.0])


class ConfigBundle(BaseModel):
    """Every tunable of a run, grouped as in the INI file."""
    model_config = ConfigDict(frozen=True)

    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    train_sin: TrainConfig = Field(default_factory=TrainConfig)
    train_prn: TrainConfig = Field(default_factory=TrainConfig)
    fista: FistaConfig = Field(default_factory=FistaConfig)
    fista_grid: FistaGrid = Field(default_factory=FistaGrid)


SECTIONS: dict[str, tuple[str, type[BaseModel]]] = {
    "pipeline": ("pipeline", PipelineConfig),
    "network": ("network", NetworkConfig),
    "train.sin": ("train_sin", TrainConfig),
    "train.prn": ("train_prn", TrainConfig),
    "fista": ("fista", FistaConfig),
    "fista.grid": ("fista_grid", FistaGrid),
}

NESTED = ("weights", "augmentation")


def _parse_override(text: str) -> tuple[str, str, str]:
    if "=" not in text:
        raise ConfigError(f"override '{text}' must look like section.key=value")
    dotted, value = text.split("=", 1)
    section, sep, key = dotted.strip().rpartition(".")
    if section.split(".")[-1] in NESTED:
        # train.sin.weights.content=...
        section, _, nested = section.rpartition(".")
        key = f"{nested}.{key}"
    if not sep or section not in SECTIONS:
        raise ConfigError(f"override '{text}': unknown section '{section}'")
    return section, key.strip(), value.strip()


def _section_values(raw: dict[str, str], section: str, model: type[BaseModel]) -> dict:
    values: dict = {}
    for key, value in raw.items():
        if "." in key:
            outer, inner = key.split(".", 1)
            if outer not in NESTED or outer not in model.model_fields:
                raise ConfigError(f"[{section}] unknown key '{key}'")
            values.setdefault(outer, {})[inner] = value
            continue
        if key not in model.model_fields:
            raise ConfigError(f"[{section}] unknown key '{key}'")
        values[key] = [v for v in value.replace(",", " ").split()] if key == "tv_weights" else value
    return values


def load_config(path: Optional[Path] = None, overrides: Sequence[str] = ()) -> ConfigBundle:
    """Read an INI file (desk defaults when None) and apply overrides.

    data/fista_grid.ini is read first, so the main file may redefine the grid.
    """
    path = Path(path) if path is not None else DEFAULT_CONFIG
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read([FISTA_GRID_CONFIG, path], encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    raw: dict[str, dict[str, str]] = {name: {} for name in SECTIONS}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{name}]")
        raw[name].update(parser[name])
    for text in overrides:
        section, key, value = _parse_override(text)
        raw[section][key] = value

    fields = {}
    for section, (field, model) in SECTIONS.items():
        values = _section_values(raw[section], section, model)
        try:
            fields[field] = model(**values)
        except ValidationError as exc:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
            )
            raise ConfigError(f"[{section}] {problems}") from exc
    return ConfigBundle(**fields)
