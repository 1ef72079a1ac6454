"""Request/response models for the pipeline service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from chronorec.config import PipelineConfig


class CommandRequest(BaseModel):
    """Run one pipeline command against a server-side workspace directory."""

    workspace: str = Field(description="Workspace directory on the server")
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class SweepRequest(CommandRequest):
    k_values: list[int] = Field(min_length=1, description="Neighbor counts to sweep")


class QueryRequest(BaseModel):
    """Ad-hoc recommendation for a free-text query."""

    workspace: str
    abstract: str
    year: int
    method: str = "time_preference"
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class CommandResponse(BaseModel):
    command: str
    workspace: str
    config_hash: str
    result: dict


class RecommendationEntry(BaseModel):
    id: str
    score: float
    slice: int


class QueryResponse(BaseModel):
    method: str
    query_slice: int
    neighbors: list[str]
    preference: list[float] | None
    entries: list[RecommendationEntry]


class ErrorBody(BaseModel):
    kind: str  # usage | data | numerical
    message: str


class HealthResponse(BaseModel):
    status: str
    name: str
    version: str
