"""Pipeline configuration model.

One nested document drives every stage; the CLI loads it from a JSON or YAML
file and lets flags override individual fields. Precedence: flags over config
file over the defaults below.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import yaml
from pydantic import BaseModel, Field

from chronorec.errors import DataError


class SliceSpec(BaseModel):
    intervals: list[tuple[int | None, int]] | None = None
    auto: int | None = Field(
        default=None, description="Balance the corpus into this many slices by count"
    )


class SplitSpec(BaseModel):
    min_refs: int = 10
    min_slices: int = 3
    test_size: int = 200


class EmbedSpec(BaseModel):
    # desk-scale defaults; the embedding modules' own defaults follow the
    # reference walk/training settings and these override them per run
    dim: int = 100
    docvec_epochs: int = 20
    negatives: int = 5
    node_p: float = 0.25
    node_q: float = 0.25
    num_walks: int = 4
    walk_length: int = 20
    window: int = 3
    node_epochs: int = 2


class ProfileSpec(BaseModel):
    # neighbor count; 100/180 are the reported full-corpus operating points,
    # 20 suits slices of a few hundred papers
    k: int = 20
    infer_epochs: int = 20
    search_on_scaled: bool = False  # kNN over max-abs-scaled vectors instead of raw


class TrainSpec(BaseModel):
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 32


class RankSpec(BaseModel):
    methods: list[str] = ["cbf", "time_preference"]
    top_n: int = 500
    pool: str = "on_or_before"
    sigma: float = 0.8
    tau_d: float = 10.0
    w1: float = 0.6
    w2: float = 0.4
    raw_preference: bool = False
    details: bool = False


class EvalSpec(BaseModel):
    cutoffs: list[int] = [30, 100]
    pr_cutoff: int = 30
    compare_query: str | None = None
    compare_methods: tuple[str, str] = ("time_preference", "cbf")


class SynthSpec(BaseModel):
    topics: int = 10
    slices: int = 5
    papers_per_slice: int = 400
    vocab_per_topic: int = 200
    background_vocab: int = 200
    background_fraction: float = 0.2
    drift_rate: float = 0.05
    cite_token_fraction: float = 0.2
    cite_sources: int = 4
    citation_budget: int = 40
    abstract_min: int = 40
    abstract_max: int = 120
    count_cap: int = 30
    start_year: int = 2000
    years_per_slice: int = 2
    profiles: list[list[float]] | None = None


class PipelineConfig(BaseModel):
    seed: int = 0
    workers: int = 1  # per-query stages fan out; reductions stay in query order
    corpus_path: str | None = None
    slices: SliceSpec = SliceSpec()
    split: SplitSpec = SplitSpec()
    embed: EmbedSpec = EmbedSpec()
    profile: ProfileSpec = ProfileSpec()
    train: TrainSpec = TrainSpec()
    rank: RankSpec = RankSpec()
    eval: EvalSpec = EvalSpec()
    synth: SynthSpec = SynthSpec()

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text or "{}")
    return PipelineConfig.model_validate(data)
