"""
analyze 命令：收缩系数、不变测度、收敛包络与 r(V)
"""

import argparse
import math

import numpy as np

from ..schemas.model_file import ModelFile
from ..services.chain_core import is_primitive
from ..services.coupling import operator_v_spectral, rate_curves
from ..services.ergodicity import (
    InvariantMethod,
    contraction_report,
    decay_slope,
    invariance_residual,
    invariant_measure,
)
from ..utils.logger import get_logger
from .base import CommandOutput, by_state

logger = get_logger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("analyze", parents=parents, help="遍历性分析")
    parser.add_argument("model", help="模型文件路径")
    parser.add_argument("--n-max", type=int, default=50, help="包络的最大步数")
    parser.add_argument("--n0", type=int, default=1, help="κ_n0 的步数")
    parser.add_argument("--cesaro-start", default=None, help="Cesàro 方法的起始状态标签")
    parser.set_defaults(handler=run)


def _slope(worst_tv: np.ndarray) -> float | None:
    """ln worst_tv(n) 在 [n_max/3, n_max] 上的斜率，窗口内有非正值时为 None"""
    stop = worst_tv.shape[0] - 1
    start = stop // 3
    window = worst_tv[start : stop + 1]
    if stop - start < 1 or np.any(window <= 1e-300):
        return None
    return decay_slope(worst_tv, start, stop)


def run(args: argparse.Namespace, model: ModelFile) -> CommandOutput:
    chain = model.chain
    contraction = contraction_report(chain, args.n0)

    mu = invariant_measure(chain, InvariantMethod.LINEAR_SOLVE)
    start = model.state(args.cesaro_start) if args.cesaro_start else 0
    mu_cesaro = invariant_measure(chain, InvariantMethod.CESARO, start=start)

    spectrum = operator_v_spectral(chain)
    curves = rate_curves(chain, args.n_max, mu, spectrum)
    bound_holds = bool(np.all(curves.worst_tv <= curves.bound_kappa + 1e-12))
    primitive = is_primitive(chain)

    results = {
        "states": list(model.states),
        "n0": contraction.n0,
        "kappa_n0": contraction.kappa_n0,
        "kappa": contraction.kappa,
        "kappa0": contraction.kappa0,
        "pairwise": contraction.pairwise,
        "mu": mu,
        "mu_by_state": by_state(model, mu),
        "mu_cesaro": mu_cesaro,
        "cesaro_agreement": float(np.abs(mu - mu_cesaro).sum()),
        "invariance_residual": invariance_residual(chain, mu),
        "primitive_index": primitive,
        "r_v": spectrum.radius,
        "log_r_v": math.log(spectrum.radius) if spectrum.radius > 0 else None,
        "r_v_within_kappa_bound": spectrum.within_kappa_bound,
        "worst_tv": curves.worst_tv,
        "bound_kappa": curves.bound_kappa,
        "bound_holds": bound_holds,
        "decay_slope": _slope(curves.worst_tv),
    }
    wellposedness = {
        "power_iterations": spectrum.iterations,
        "power_converged": spectrum.converged,
    }
    rows = curves.rows()
    csv = {
        "n": [r[0] for r in rows],
        "worst_tv": [r[1] for r in rows],
        "bound_kappa": [r[2] for r in rows],
        "bound_rv": [r[3] for r in rows],
    }
    logger.info(f"analyze 完成 | κ: {contraction.kappa:.6g} | r(V): {spectrum.radius:.6g}")
    return CommandOutput(results=results, wellposedness=wellposedness, csv=csv)
