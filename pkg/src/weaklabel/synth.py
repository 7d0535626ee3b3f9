"""Seeded synthetic corpora for testing: Gaussian clusters plus distractors.

Writes the three input files a run needs (task docs, external docs, class
descriptions) in the engine's binary format. Class descriptions are the
unit-normalized cluster centers; task and external documents are raw
Gaussian draws around ``separation * center`` with unit per-coordinate
noise, so ``separation`` is expressed in units of the cluster standard
deviation. A configurable fraction of the external corpus is isotropic
noise (uniform directions after load-time normalization). Gold labels go
into the metadata sidecars; distractors carry none.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .vecstore import save_store


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int
    dim: int
    docs_per_class: int
    external_size: int
    separation: float
    noise_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")
        if self.dim < 2:
            raise ConfigError("dim must be >= 2")
        if self.docs_per_class < 1:
            raise ConfigError("docs_per_class must be >= 1")
        if self.external_size < 1:
            raise ConfigError("external_size must be >= 1")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ConfigError("noise_fraction must be in [0, 1)")


@dataclass(frozen=True)
class SynthPaths:
    task_path: Path
    external_path: Path
    classes_path: Path


def generate_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> SynthPaths:
    """Write task/external/classes files into out_dir. Deterministic per spec."""
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    k, dim = spec.num_classes, spec.dim

    centers = rng.normal(size=(k, dim))
    centers /= np.linalg.norm(centers, axis=1)[:, None]

    task_rows = []
    task_labels: list[int | None] = []
    for j in range(k):
        draws = spec.separation * centers[j] + rng.normal(
            size=(spec.docs_per_class, dim)
        )
        task_rows.append(draws)
        task_labels.extend([j + 1] * spec.docs_per_class)
    task = np.concatenate(task_rows)

    n_noise = int(round(spec.external_size * spec.noise_fraction))
    n_cluster = spec.external_size - n_noise
    per_class = [n_cluster // k + (1 if j < n_cluster % k else 0) for j in range(k)]
    ext_rows = []
    ext_labels: list[int | None] = []
    for j in range(k):
        draws = spec.separation * centers[j] + rng.normal(size=(per_class[j], dim))
        ext_rows.append(draws)
        ext_labels.extend([j + 1] * per_class[j])
    if n_noise:
        ext_rows.append(rng.normal(size=(n_noise, dim)))
        ext_labels.extend([None] * n_noise)
    external = np.concatenate(ext_rows)

    task_path = out_dir / "task.fcem"
    external_path = out_dir / "external.fcem"
    classes_path = out_dir / "classes.fcem"
    save_store(
        task_path,
        task,
        [f"x{i:06d}" for i in range(len(task))],
        labels=task_labels,
    )
    save_store(
        external_path,
        external,
        [f"u{i:06d}" for i in range(len(external))],
        labels=ext_labels,
    )
    save_store(
        classes_path,
        centers,
        [f"class{j + 1}" for j in range(k)],
        texts=[f"synthetic class {j + 1}" for j in range(k)],
    )
    return SynthPaths(
        task_path=task_path, external_path=external_path, classes_path=classes_path
    )
