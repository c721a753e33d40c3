from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    log_level: str = "INFO"

    # decoding defaults, overridable per run from the command line
    beam_width: int = 5
    top_n: int = 1
    jobs: int = 1

    scorer_timeout_seconds: float = 30.0

    enrich_threshold: float = 0.8
    knn_neighbors: int = 5
    min_informative_tokens: int = 2

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="TAXCODE_",
        case_sensitive=False,
    )


settings = Settings()
