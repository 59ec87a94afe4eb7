"""
ergo 命令行入口

    ergo analyze <model> [--n-max K] [--n0 K]
    ergo couple <model> --from A --to B [--simple|--vaserstein] [--paths M] [--seed U64]
    ergo limits <model> --observable NAME [--mode mean|clt] [--n K] [--replicas M] [--seed U64]
    ergo ldp <model> --observable NAME [--beta-min X --beta-max X --grid K] [--epsilon X --n K]
    ergo poisson <model> --observable NAME [--boundary NAME --boundary-data NAME] [--potential NAME] [--method linear|series|mc]

每个命令都接受 --out / --csv / --format / --log-level。
"""

import argparse
import sys
import warnings
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .commands import COMMANDS
from .config import settings
from .exceptions import ErgoError, ErgoWarning
from .schemas.model_file import parse_model
from .schemas.report import Diagnostics, Report
from .services.replica_pool import get_replica_pool
from .utils.logger import get_logger, init_logging
from .utils.memory_utils import MemoryTracker, log_memory_status
from .utils.report_io import file_digest, to_jsonable, write_csv, write_report

logger = get_logger("ergo.main")

# 不回显到报告的参数
_UNECHOED = {"handler", "model", "out", "csv", "format", "log_level"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="报告输出路径，缺省写到 stdout")
    common.add_argument("--csv", default=None, help="CSV 绘图数据输出路径")
    common.add_argument("--format", choices=["json", "text"], default="json", help="报告格式")
    common.add_argument("--log-level", default=None, help="覆盖配置中的日志级别")

    parser = argparse.ArgumentParser(prog="ergo", description=settings.app.description)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app.version}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS.values():
        module.register(subparsers, [common])
    return parser


def _command_echo(args: argparse.Namespace) -> Dict[str, Any]:
    echo = {"name": args.command, "model": Path(args.model).name}
    for key, value in sorted(vars(args).items()):
        if key not in _UNECHOED and key != "command":
            echo[key] = value
    return echo


def _collect_warnings(caught: List[warnings.WarningMessage]) -> List[str]:
    messages: List[str] = []
    for item in caught:
        if not issubclass(item.category, ErgoWarning):
            continue
        text = f"{item.category.__name__}: {item.message}"
        if text not in messages:
            messages.append(text)
    return messages


def run(args: argparse.Namespace) -> Report:
    """执行单个命令并构造报告"""
    model = parse_model(args.model)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with MemoryTracker(f"ergo {args.command}", auto_cleanup=True):
            output = args.handler(args, model)

    diagnostics = Diagnostics(
        warnings=_collect_warnings(caught),
        wellposedness=to_jsonable(output.wellposedness),
    )
    for message in diagnostics.warnings:
        logger.warning(f"诊断警告 | {message}")

    report = Report(
        command=to_jsonable(_command_echo(args)),
        input_digest=file_digest(args.model),
        results=to_jsonable(output.results),
        diagnostics=diagnostics,
        seed=output.seed,
    )
    if args.csv and output.csv:
        write_csv(args.csv, output.csv)
    return report


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数，返回进程退出码"""
    args = build_parser().parse_args(argv)
    if args.log_level:
        init_logging(
            level=args.log_level,
            log_format=settings.logging.format,
            file_enabled=settings.logging.file_enabled,
            file_path=settings.logging.file_path,
            force=True,
        )

    logger.info(f"命令开始 | 命令: {args.command} | 模型: {args.model}")
    try:
        report = run(args)
        text = write_report(report, args.out, args.format)
        if not args.out:
            sys.stdout.write(text)
        logger.info(f"命令完成 | 命令: {args.command}")
        return 0
    except ErgoError as e:
        logger.error(f"命令失败 | 错误: {type(e).__name__} | 退出码: {e.exit_code} | {e}")
        print(f"error[{type(e).__name__}]: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"未预期的错误 | {type(e).__name__}: {e}")
        log_memory_status("未预期的错误")
        print(f"error[{type(e).__name__}]: {e}", file=sys.stderr)
        return 1
    finally:
        get_replica_pool().shutdown()


if __name__ == "__main__":
    sys.exit(main())
