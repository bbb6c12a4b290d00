from typing import Literal

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Dimensions
    embedding_dim: int = Field(
        default=32,
        validation_alias=AliasChoices("EMBEDDING_DIM", "SG_EMBEDDING_DIM"),
    )
    hidden_dim: int = 32
    image_dim: int = Field(
        default=32,
        validation_alias=AliasChoices("IMAGE_DIM", "IMAGE_EMBEDDING_DIM"),
    )
    edge_embedding_dim: int = 8

    # Search
    search_gamma: float = Field(
        default=0.5,
        validation_alias=AliasChoices("SEARCH_GAMMA", "IMPORTANCE_THRESHOLD"),
    )
    search_lambda: float = Field(
        default=0.75,
        validation_alias=AliasChoices("SEARCH_LAMBDA", "HALTING_THRESHOLD"),
    )
    search_t_max: int = 10
    round_aggregation: Literal["max", "mean", "sum"] = "max"
    image_conditioning: bool = False

    # Scene graph construction
    min_confidence: float = 0.0
    near_radius_ratio: float = 0.5
    edge_mode: Literal["geometric", "learned"] = "geometric"

    # Training
    train_epochs: int = 30
    train_lr: float = 1e-3
    train_seed: int = 0
    importance_loss_weight: float = 1.0
    importance_k_hops: int = 2
    teacher_forcing: bool = True

    log_level: str = "INFO"

    class Config:
        env_file = ".env"
        extra = "ignore"  # Ignore extra fields in .env (prevents errors)


settings = Settings()
