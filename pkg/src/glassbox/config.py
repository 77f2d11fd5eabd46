"""Pipeline configuration and artifact provenance.

One PipelineConfig drives every stage. Each artifact a stage writes embeds
the full config plus checksums of the artifacts it consumed, so any output
can be traced to the exact inputs that produced it, and identical
config+seed reruns are byte-identical.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields

from .data.synth import DatasetSpec

ENV_HOME = "GLASSBOX_HOME"
DEFAULT_HOME = "glassbox_home"


@dataclass(frozen=True)
class PipelineConfig:
    # structural analysis
    gamma: float = 2.0
    k: int = 5
    l: int = 3
    stats_top_n: int = 100
    # receptive fields
    rf_tau: float = 0.1
    rf_radius: int = 2
    # dataset
    num_classes: int = 8
    pool_size: int = 10
    attributes_per_class: int = 3
    train_per_class: int = 200
    test_per_class: int = 50
    distractor_probability: float = 0.0
    noise_level: float = 0.05
    # training
    architecture: str = "reference"
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.02
    # annotation
    auto_threshold: float = 0.8
    images_per_feature: int = 12
    # consistency
    workers_per_question: int = 1
    pcr_overlap: float = 0.25
    diagnose_low: float = 0.5
    bins: int = 5
    # ablation report
    ablation_max_deleted: int = 20
    ablation_trials: int = 3
    # shared
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be >= 1")
        if self.stats_top_n is not None and self.stats_top_n < 1:
            raise ValueError("stats_top_n must be >= 1 or None")
        self.dataset_spec()  # validates the dataset fields

    def dataset_spec(self):
        return DatasetSpec(
            num_classes=self.num_classes,
            pool_size=self.pool_size,
            attributes_per_class=self.attributes_per_class,
            train_per_class=self.train_per_class,
            test_per_class=self.test_per_class,
            distractor_probability=self.distractor_probability,
            noise_level=self.noise_level,
            seed=self.seed,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def resolve_home(home=None):
    return home or os.environ.get(ENV_HOME) or DEFAULT_HOME


def checksum(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance(config, input_paths):
    """The provenance envelope embedded in every artifact."""
    return {
        "config": config.to_dict(),
        "inputs": {
            os.path.basename(p): checksum(p) for p in sorted(input_paths)
        },
    }


def write_json_artifact(path, config, input_paths, payload):
    """JSON artifact = provenance envelope + payload keys, stable bytes."""
    doc = dict(payload)
    doc["provenance"] = provenance(config, input_paths)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json_artifact(path):
    with open(path) as fh:
        return json.load(fh)
