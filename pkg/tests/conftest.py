from pathlib import Path

import numpy as np
import pytest

from src.core.config import RunConfig

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def config(tmp_path) -> RunConfig:
    """Configuración por defecto con los reportes en un directorio temporal."""
    return RunConfig(output_dir=str(tmp_path / "output"))


@pytest.fixture
def coarse(config) -> RunConfig:
    """Malla reducida para las pruebas de integración más pesadas."""
    return config.with_overrides(nt=7, nx=21)


@pytest.fixture
def rng(config) -> np.random.Generator:
    """Generador con la semilla de RunConfig: los sorteos se repiten entre corridas."""
    return np.random.default_rng(config.seed)
