import json
from dataclasses import dataclass, field

from metagap.config import PhysicalConfig, SimulationConfig
from metagap.custom_types import LabelMode


@dataclass
class LabelsConfig:
    """
    Label policy settings shared by every subcommand that labels gaps.
    """

    mode: LabelMode = "intersect"
    min_width: float = 0.0
    ranges: list[str] = field(default_factory=list)


@dataclass
class ProjectConfig:
    """
    Configuration read from `metagap.toml`.
    """

    physics: PhysicalConfig = field(default_factory=PhysicalConfig)
    # unset means each subcommand keeps its own discretisation defaults
    simulation: SimulationConfig | None = None
    labels: LabelsConfig = field(default_factory=LabelsConfig)
    data_dir: str | None = None


@dataclass
class RunManifest:
    """
    What produced an output file, written next to it as `<output>.run.toml`.

    ```python
    import tomllib
    from metagap.tools.models import RunManifest
    m = RunManifest("sample", {"count": "5"}, {"tset.txt": "ab12"}, seed=7, version="1.0", elapsed=0.5, jobs=2)
    doc = tomllib.loads(m.to_toml())
    assert doc["subcommand"] == "sample" and doc["flags"]["count"] == "5"
    ```
    """

    subcommand: str
    flags: dict[str, str]
    inputs: dict[str, str]
    seed: int | None
    version: str
    elapsed: float
    jobs: int

    def to_toml(self) -> str:
        # JSON strings are valid TOML basic strings
        lines = [
            f"subcommand = {json.dumps(self.subcommand)}",
            f"version = {json.dumps(self.version)}",
        ]
        if self.seed is not None:
            lines.append(f"seed = {self.seed}")
        lines += [f"jobs = {self.jobs}", f"elapsed = {self.elapsed:.3f}", "", "[flags]"]
        lines += [f"{json.dumps(k)} = {json.dumps(v)}" for k, v in sorted(self.flags.items())]
        lines += ["", "[inputs]"]
        lines += [f"{json.dumps(k)} = {json.dumps(v)}" for k, v in sorted(self.inputs.items())]
        return "\n".join(lines) + "\n"
