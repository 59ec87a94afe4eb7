"""
limits 命令：渐近方差与 LLN / CLT 实验
"""

import argparse
import warnings

import numpy as np

from ..config import settings
from ..exceptions import VacuousBound, VacuousBoundWarning
from ..schemas.model_file import ModelFile
from ..services.ergodicity import invariant_measure
from ..services.limits import ExperimentMode, asymptotic_variance, finite_n_variance, lln_clt_experiment
from ..utils.logger import get_logger
from .base import CommandOutput, resolve_law, resolve_seed, seed_record

logger = get_logger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("limits", parents=parents, help="极限定理诊断")
    parser.add_argument("model", help="模型文件路径")
    parser.add_argument("--observable", required=True, help="观测值名称")
    parser.add_argument("--mode", choices=[m.value for m in ExperimentMode], default=ExperimentMode.CLT.value)
    parser.add_argument("--n", type=int, default=1000, help="每个副本的步数")
    parser.add_argument("--replicas", type=int, default=None, help="副本数")
    parser.add_argument("--seed", type=int, default=None, help="主种子")
    parser.add_argument("--init", default=None, help="初始分布名或状态标签，缺省为不变测度")
    parser.add_argument("--epsilon", type=float, default=None, help="mean 模式的偏差阈值")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, model: ModelFile) -> CommandOutput:
    chain = model.chain
    f = model.observable(args.observable)
    mu = invariant_measure(chain)
    init = mu if args.init is None else resolve_law(model, args.init)
    replicas = settings.simulation.replicas if args.replicas is None else args.replicas
    seed = resolve_seed(args.seed)
    mode = ExperimentMode(args.mode)

    results: dict = {"observable": args.observable, "mean_inv": float(f @ mu)}
    wellposedness: dict = {}
    try:
        variance = asymptotic_variance(chain, f, mu=mu)
        results["sigma2"] = variance.sigma2
        wellposedness.update(variance.to_dict())
    except VacuousBound as e:
        if mode == ExperimentMode.CLT:
            raise
        warnings.warn(f"σ² 不可用: {e}", VacuousBoundWarning, stacklevel=2)
        results["sigma2"] = None
    results["finite_n_variance"] = finite_n_variance(chain, f, args.n, mu)

    experiment = lln_clt_experiment(
        chain, f, args.n, replicas, mode, init, seed, epsilon=args.epsilon, mu=mu
    )
    results["experiment"] = experiment.summary()

    csv = {"replica": list(range(replicas)), "value": np.asarray(experiment.samples).tolist()}
    return CommandOutput(results=results, wellposedness=wellposedness, seed=seed_record(seed), csv=csv)
