"""
poisson 命令：四类离散泊松方程
"""

import argparse

import numpy as np

from ..exceptions import ModelValidationError
from ..schemas.model_file import ModelFile
from ..services.poisson import (
    BoundaryProblem,
    SolveMethod,
    dynkin_verify,
    solve_dirichlet,
    solve_dirichlet_potential,
    solve_whole,
    solve_whole_potential,
)
from ..utils.logger import get_logger
from .base import CommandOutput, by_state, resolve_seed, seed_record

logger = get_logger(__name__)

DYNKIN_STEPS = 20


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("poisson", parents=parents, help="泊松方程求解")
    parser.add_argument("model", help="模型文件路径")
    parser.add_argument("--observable", required=True, help="源项 f 的观测值名称")
    region = parser.add_mutually_exclusive_group()
    region.add_argument("--whole", action="store_true", help="全空间问题（默认）")
    region.add_argument("--boundary", default=None, help="Dirichlet 边界名称")
    parser.add_argument("--boundary-data", default=None, help="边界数据 g 的观测值名称，缺省为 0")
    parser.add_argument("--potential", default=None, help="势函数名称")
    parser.add_argument("--method", choices=["linear", "series", "mc"], default="linear")
    parser.add_argument("--paths", type=int, default=None, help="蒙特卡罗路径数")
    parser.add_argument("--seed", type=int, default=None, help="主种子")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, model: ModelFile) -> CommandOutput:
    chain = model.chain
    f = model.observable(args.observable)
    potential = model.potential(args.potential) if args.potential else None
    method = SolveMethod.parse(args.method)
    seed = resolve_seed(args.seed) if method == SolveMethod.MONTE_CARLO else None

    if args.boundary is None:
        if args.boundary_data:
            raise ModelValidationError("--boundary-data 需要与 --boundary 一起使用")
        if potential is None:
            solution = solve_whole(chain, f, method, paths=args.paths, seed=seed)
            problem_kind = "whole"
        else:
            solution = solve_whole_potential(chain, potential, f, method, paths=args.paths, seed=seed)
            problem_kind = "whole_potential"
    else:
        g = model.observable(args.boundary_data) if args.boundary_data else np.zeros(chain.size)
        problem = BoundaryProblem(chain, model.boundary(args.boundary), f, g, potential)
        if potential is None:
            solution = solve_dirichlet(problem, method, paths=args.paths, seed=seed)
            problem_kind = "dirichlet"
        else:
            solution = solve_dirichlet_potential(problem, method, paths=args.paths, seed=seed)
            problem_kind = "dirichlet_potential"

    dynkin_defect = max(
        dynkin_verify(chain, solution.values, x, DYNKIN_STEPS, potential).defect for x in range(chain.size)
    )
    results = {
        "problem": problem_kind,
        "method": solution.method.value,
        "values": solution.values,
        "values_by_state": by_state(model, solution.values),
        "residual": solution.residual,
        "crosscheck": solution.crosscheck,
        "dynkin_defect": dynkin_defect,
    }
    if solution.std_error is not None:
        results["std_error"] = solution.std_error

    csv = {
        "state": list(model.states),
        "u": solution.values.tolist(),
    }
    return CommandOutput(
        results=results,
        wellposedness=solution.wellposedness,
        seed=seed_record(seed) if seed is not None else None,
        csv=csv,
    )
