"""
配置管理模块

支持从YAML配置文件和环境变量加载配置
优先级：环境变量 > 配置文件 > 代码默认值
"""

from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import Field
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource


# 项目根目录
PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"


def load_yaml_config(config_path: Optional[Path] = None) -> Dict[str, Any]:
    """加载YAML配置文件"""
    if config_path is None:
        config_path = CONFIG_DIR / "config.yaml"

    if not config_path.exists():
        return {}

    with open(config_path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


class SectionSettings(BaseSettings):
    """
    配置节基类

    YAML 的值以初始化参数传入；环境变量源排在它之前，因此同名键以环境变量为准。
    """

    # 无别名字段读取 ERGO_<字段名>
    model_config = {"env_prefix": "ERGO_", "extra": "ignore", "populate_by_name": True}

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return env_settings, init_settings, dotenv_settings, file_secret_settings


class AppSettings(SectionSettings):
    """应用配置"""

    name: str = Field(default="ergo")
    description: str = Field(default="有限状态马尔可夫链分析工具包")
    version: str = Field(default="1.0.0")


class LoggingSettings(SectionSettings):
    """日志配置"""

    level: str = Field(default="INFO", alias="ERGO_LOG_LEVEL")
    format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    file_enabled: bool = Field(default=False, alias="ERGO_LOG_FILE_ENABLED")
    file_path: str = Field(default="./logs/ergo.log", alias="ERGO_LOG_FILE_PATH")


class NumericsSettings(SectionSettings):
    """数值容差配置"""

    row_sum_tolerance: float = Field(default=1e-9, alias="ERGO_ROW_SUM_TOLERANCE")
    distribution_tolerance: float = Field(default=1e-12)
    cesaro_tolerance: float = Field(default=1e-10)
    cesaro_max_doublings: int = Field(default=60)
    power_tolerance: float = Field(default=1e-10, alias="ERGO_POWER_TOLERANCE")
    power_max_iterations: int = Field(default=100_000, alias="ERGO_POWER_MAX_ITERATIONS")
    perron_tolerance: float = Field(default=1e-12)
    series_tolerance: float = Field(default=1e-12)
    variance_tolerance: float = Field(default=1e-12)


class SimulationSettings(SectionSettings):
    """蒙特卡罗模拟配置"""

    default_seed: int = Field(default=20240101, alias="ERGO_DEFAULT_SEED")
    # 每个子流负责的路径数
    block_size: int = Field(default=256, alias="ERGO_BLOCK_SIZE")
    paths: int = Field(default=100_000)
    replicas: int = Field(default=10_000)
    horizon: int = Field(default=20)
    mc_horizon_tail: float = Field(default=1e-9)


class WorkerSettings(SectionSettings):
    """并行工作者配置"""

    # 最大并行工作者数量，0表示自动检测CPU数量
    max_workers: int = Field(default=0, alias="ERGO_MAX_WORKERS")
    # 执行模式：thread (默认) 或 serial
    execution_mode: str = Field(default="thread", alias="ERGO_EXECUTION_MODE")


class DeviationSettings(SectionSettings):
    """大偏差配置"""

    denominator: int = Field(default=1000, alias="ERGO_LD_DENOMINATOR")
    delta0: float = Field(default=1e-3)
    beta_min: float = Field(default=-5.0)
    beta_max: float = Field(default=5.0)
    grid_points: int = Field(default=201)
    max_grid_extensions: int = Field(default=8)
    max_table_cells: int = Field(default=10_000_000)


class ReportSettings(SectionSettings):
    """报告输出配置"""

    indent: int = Field(default=2)
    csv_float_format: str = Field(default="%.17g")


class Settings:
    """统一配置管理类"""

    def __init__(self, config_path: Optional[Path] = None):
        # 加载YAML配置
        yaml_config = load_yaml_config(config_path)

        # 初始化各子配置
        self.app = AppSettings(**yaml_config.get("app", {}))
        self.logging = LoggingSettings(**yaml_config.get("logging", {}))
        self.numerics = NumericsSettings(**yaml_config.get("numerics", {}))
        self.simulation = SimulationSettings(**yaml_config.get("simulation", {}))
        self.workers = WorkerSettings(**yaml_config.get("workers", {}))
        self.deviations = DeviationSettings(**yaml_config.get("deviations", {}))
        self.report = ReportSettings(**yaml_config.get("report", {}))


@lru_cache()
def get_settings() -> Settings:
    """获取配置单例"""
    return Settings()


# 便捷访问
settings = get_settings()
