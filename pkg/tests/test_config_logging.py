import logging

import pytest

from ergo.config import CONFIG_DIR, Settings, load_yaml_config, settings
from ergo.exceptions import (
    ErgoError,
    ErgoWarning,
    IllPosed,
    NonUniqueWarning,
    ParseError,
    UnknownReference,
    exit_code_table,
)
from ergo.services.replica_pool import HISTORY_LIMIT, ExecutionMode, PoolStats, ReplicaPool, get_replica_pool
from ergo.utils.logger import get_logger, init_logging
from ergo.utils.memory_utils import (
    MemoryTracker,
    cleanup_memory,
    estimate_array_mb,
    get_memory_info,
    log_memory_status,
)


class TestSettings:
    def test_project_config(self):
        assert settings.app.name == "ergo"
        assert settings.numerics.row_sum_tolerance == 1e-9
        assert settings.simulation.block_size >= 1
        assert settings.deviations.denominator == 1000

    def test_yaml_override(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("simulation:\n  block_size: 64\ndeviations:\n  delta0: 0.01\n", encoding="utf-8")
        custom = Settings(path)
        assert custom.simulation.block_size == 64
        assert custom.deviations.delta0 == 0.01
        assert custom.numerics.series_tolerance == 1e-12

    def test_missing_file_gives_defaults(self, tmp_path):
        assert load_yaml_config(tmp_path / "absent.yaml") == {}
        assert Settings(tmp_path / "absent.yaml").workers.execution_mode == "thread"

    def test_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ERGO_MAX_WORKERS", "3")
        assert Settings(tmp_path / "absent.yaml").workers.max_workers == 3

    def test_environment_overrides_shipped_yaml(self, monkeypatch):
        shipped = load_yaml_config(CONFIG_DIR / "config.yaml")
        assert "max_workers" in shipped["workers"]
        assert "default_seed" in shipped["simulation"]
        monkeypatch.setenv("ERGO_MAX_WORKERS", "3")
        monkeypatch.setenv("ERGO_DEFAULT_SEED", "7")
        custom = Settings()
        assert custom.workers.max_workers == 3
        assert custom.simulation.default_seed == 7
        assert custom.simulation.block_size == shipped["simulation"]["block_size"]

    def test_environment_overrides_custom_yaml(self, tmp_path, monkeypatch):
        path = tmp_path / "config.yaml"
        path.write_text("simulation:\n  block_size: 64\ndeviations:\n  delta0: 0.01\n", encoding="utf-8")
        monkeypatch.setenv("ERGO_BLOCK_SIZE", "32")
        monkeypatch.setenv("ERGO_DELTA0", "0.5")
        custom = Settings(path)
        assert custom.simulation.block_size == 32
        assert custom.deviations.delta0 == 0.5


class TestExceptions:
    def test_exit_codes_are_unique(self):
        table = exit_code_table()
        assert len(set(table.values())) == len(table)
        assert table["ErgoError"] == 1
        assert table["ParseError"] == 14
        assert table["NoConvergence"] == 30
        assert all(code not in (0, 2) for code in table.values())

    def test_messages(self):
        error = ParseError(3, "bad token")
        assert error.line == 3
        assert "bad token" in str(error)
        assert str(UnknownReference("f", "观测值")) == "未知的观测值: f"
        assert IllPosed("r ≥ 1", spectral_radius=1.2).spectral_radius == 1.2

    def test_hierarchy(self):
        assert issubclass(NonUniqueWarning, ErgoWarning)
        assert issubclass(ErgoWarning, UserWarning)
        assert not issubclass(NonUniqueWarning, ErgoError)


class TestLogging:
    def test_package_logger(self):
        logger = get_logger("ergo.services.demo")
        assert logger.name == "ergo.services.demo"
        root = logging.getLogger("ergo")
        assert root.handlers
        assert root.propagate is False

    def test_file_handler(self, tmp_path):
        path = tmp_path / "logs" / "ergo.log"
        try:
            init_logging(level="DEBUG", file_enabled=True, file_path=str(path), force=True)
            get_logger("ergo.tests").debug("文件日志 | key: value")
            for handler in logging.getLogger("ergo").handlers:
                handler.flush()
            assert "文件日志 | key: value" in path.read_text(encoding="utf-8")
        finally:
            init_logging(level=settings.logging.level, log_format=settings.logging.format, force=True)


class TestMemory:
    def test_estimate(self):
        assert estimate_array_mb(1024, 128) == pytest.approx(1.0)
        assert estimate_array_mb(10, itemsize=1) == pytest.approx(10 / 1024**2)

    def test_tracker(self):
        with MemoryTracker("test") as tracker:
            data = bytearray(1024)
        assert data
        assert tracker.memory_before["rss_mb"] >= 0.0
        assert tracker.memory_after is not None
        assert isinstance(tracker.delta_mb, float)

    def test_info(self):
        assert get_memory_info()["rss_mb"] > 0.0

    def test_cleanup(self):
        result = cleanup_memory(aggressive=True)
        assert set(result) == {"before", "after", "freed_mb"}
        assert result["freed_mb"] >= 0.0
        log_memory_status("测试")

    def test_tracker_auto_cleanup(self):
        with MemoryTracker("cleanup", auto_cleanup=True) as tracker:
            pass
        assert tracker.memory_after is not None


class TestReplicaPool:
    def test_singleton(self):
        assert get_replica_pool() is ReplicaPool()

    def test_order_preserved(self):
        pool = get_replica_pool()
        assert pool.map_blocks(lambda x: x * x, range(50)) == [x * x for x in range(50)]

    def test_serial_mode(self, serial_pool):
        assert serial_pool.mode == ExecutionMode.SERIAL
        assert serial_pool.map_blocks(str, [3, 1, 2]) == ["3", "1", "2"]

    def test_errors_propagate(self):
        def _fail(x):
            if x == 3:
                raise ValueError("block failed")
            return x

        with pytest.raises(ValueError, match="block failed"):
            get_replica_pool().map_blocks(_fail, range(8))

    def test_stats(self):
        pool = get_replica_pool()
        before = pool.stats.blocks
        pool.map_blocks(abs, [-1, -2])
        assert pool.stats.blocks == before + 2
        assert set(pool.info()) == {"mode", "max_workers", "batches", "blocks"}

    def test_history_is_bounded(self):
        stats = PoolStats()
        for i in range(HISTORY_LIMIT + 50):
            stats.record(1, float(i))
        assert stats.batches == HISTORY_LIMIT + 50
        assert len(stats.history) == HISTORY_LIMIT
        assert stats.history[-1] == float(HISTORY_LIMIT + 49)

    def test_shutdown_and_reuse(self):
        pool = get_replica_pool()
        pool.map_blocks(abs, [-1, -2, -3])
        pool.shutdown()
        assert pool.map_blocks(abs, [-4, -5]) == [4, 5]
