"""Built-in scenarios with their analytic ground truth.

Scenario definitions live in scenarios/*.cfg, written in the same
config format users supply, so the catalog doubles as format
documentation. Expected tables (critical values, indices, eigenvalue
floors, edge sets, curvature class) live in sibling *.expected.json
data files regenerated by oracles/generate_expected.py.
"""

import json
from dataclasses import dataclass
from importlib import resources

from .config import ScenarioConfig, parse_scenario_file, parse_scenario_text
from .errors import UnknownScenarioError

_CATALOG_NAMES = ("clifford", "sphere2", "sphereM", "torus_upright")


@dataclass(frozen=True)
class ExpectedData:
    """Analytic ground truth used by tests and the acceptance suite."""

    values: tuple
    indices: tuple
    locations: tuple
    lambda_min: dict  # critical point id (int) -> smallest eigenvalue
    euler_characteristic: int
    directed_edges: tuple
    curvature_class: str
    sectional_curvature: float | None

    @staticmethod
    def from_json(payload):
        return ExpectedData(
            values=tuple(payload["values"]),
            indices=tuple(payload["indices"]),
            locations=tuple(tuple(row) for row in payload["locations"]),
            lambda_min={int(k): v for k, v in payload["lambda_min"].items()},
            euler_characteristic=int(payload["euler_characteristic"]),
            directed_edges=tuple(
                tuple(edge) for edge in payload["directed_edges"]
            ),
            curvature_class=payload["curvature_class"],
            sectional_curvature=payload["sectional_curvature"],
        )


@dataclass(frozen=True)
class Scenario:
    """A manifold, a function on it, and (for catalog entries) oracles."""

    name: str
    config: ScenarioConfig
    expected: ExpectedData | None

    def build_manifold(self):
        return self.config.build_manifold()

    def build_function(self):
        return self.config.build_function()

    @property
    def seed(self):
        return self.config.seed


def list_scenarios():
    return list(_CATALOG_NAMES)


def _read_resource(filename):
    ref = resources.files("morseflow").joinpath("scenarios", filename)
    return ref.read_text(encoding="utf-8")


def load_scenario(name):
    """Catalog lookup; unknown names fail with the available list."""
    if name not in _CATALOG_NAMES:
        raise UnknownScenarioError(
            f"unknown scenario {name!r}; available: "
            + ", ".join(_CATALOG_NAMES)
        )
    config = parse_scenario_text(_read_resource(f"{name}.cfg"),
                                 default_name=name)
    expected = ExpectedData.from_json(
        json.loads(_read_resource(f"{name}.expected.json"))
    )
    return Scenario(name=name, config=config, expected=expected)


def load_scenario_file(path):
    """A user scenario file: same format, no expected table."""
    config = parse_scenario_file(path)
    return Scenario(name=config.name, config=config, expected=None)
