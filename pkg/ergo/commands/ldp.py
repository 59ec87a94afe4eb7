"""
ldp 命令：尺度化累积量生成函数、速率函数与精确尾概率
"""

import argparse
import math
from functools import partial

import numpy as np

from ..config import settings
from ..exceptions import BracketFailure, ModelValidationError
from ..schemas.model_file import ModelFile
from ..services.deviations import (
    cgf_derivatives,
    ld_tail_exact,
    legendre_pair,
    rate_function_table,
    scaled_cgf,
)
from ..services.ergodicity import invariant_measure
from ..utils.logger import get_logger
from .base import CommandOutput

logger = get_logger(__name__)


def register(subparsers, parents) -> None:
    cfg = settings.deviations
    parser = subparsers.add_parser("ldp", parents=parents, help="大偏差分析")
    parser.add_argument("model", help="模型文件路径")
    parser.add_argument("--observable", required=True, help="观测值名称")
    parser.add_argument("--beta-min", type=float, default=cfg.beta_min)
    parser.add_argument("--beta-max", type=float, default=cfg.beta_max)
    parser.add_argument("--grid", type=int, default=cfg.grid_points, help="β 网格点数")
    parser.add_argument("--alpha-points", type=int, default=21, help="α 网格点数（覆盖 [min f, max f]）")
    parser.add_argument("--epsilon", type=float, default=None, help="尾事件阈值 ε")
    parser.add_argument("--n", type=int, default=None, help="尾概率的步数")
    parser.add_argument("--init", default=None, help="尾概率的起始状态标签，缺省为第一个状态")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, model: ModelFile) -> CommandOutput:
    if args.grid < 2 or args.beta_min >= args.beta_max:
        raise ModelValidationError("β 网格需要 beta_min < beta_max 且至少 2 个点")
    if (args.epsilon is None) != (args.n is None):
        raise ModelValidationError("--epsilon 与 --n 需要同时给出")

    chain = model.chain
    f = model.observable(args.observable)
    beta_grid = np.linspace(args.beta_min, args.beta_max, args.grid)
    alpha_grid = np.linspace(float(f.min()), float(f.max()), max(2, args.alpha_points))
    grid = {"beta_min": args.beta_min, "beta_max": args.beta_max, "grid_points": args.grid}
    table = rate_function_table(chain, f, beta_grid, alpha_grid, **grid)

    first, second = cgf_derivatives(chain, f)
    results = {
        "observable": args.observable,
        "mean_inv": float(f @ invariant_measure(chain)),
        "H_at_zero": scaled_cgf(chain, f, 0.0),
        "H_prime_at_zero": first,
        "H_second_at_zero": second,
        "table": table.to_dict(),
    }

    if args.epsilon is not None:
        init = model.state(args.init) if args.init else 0
        tail = ld_tail_exact(chain, f, args.epsilon, args.n, init, **grid)
        try:
            L, L_tilde = legendre_pair(
                partial(scaled_cgf, chain, f, check=False), args.epsilon, mean=results["mean_inv"], **grid
            )
        except BracketFailure as e:
            # ε 在 f 的取值范围外
            logger.warning(f"速率函数为 +∞ | ε: {args.epsilon} | {e}")
            L = L_tilde = math.inf
        results["tail"] = tail.to_dict()
        results["L"] = L
        results["L_tilde"] = L_tilde
        results["verdict"] = tail.holds

    csv = {"beta": table.beta_grid.tolist(), "H": table.H_values.tolist()}
    return CommandOutput(results=results, csv=csv)
