"""newswarn: district-level food-crisis early warning from news streams."""

from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, NumericalError, PipelineError
from .pipeline import run_pipeline
from .synth import PlantedFeature, SyntheticSpec, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "PipelineConfig",
    "PipelineError",
    "PlantedFeature",
    "SyntheticSpec",
    "generate_synthetic",
    "load_config",
    "run_pipeline",
    "__version__",
]
