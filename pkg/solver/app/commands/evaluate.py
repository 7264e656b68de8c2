"""
eval 명령
에이전트별 FSC 파일의 결합 가치를 계산합니다 (선택적으로 몬테카를로 추정).
"""
import argparse
import logging
from pathlib import Path

import numpy as np

from ..config import get_settings
from ..exceptions import AlphabetMismatch
from ..services.fsc_service import evaluate_joint
from ..services.simulation_service import simulate
from ..storage import load_fscs, load_problem

logger = logging.getLogger(__name__)

NAME = "eval"
DEFAULT_HORIZON = 200


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="결합 FSC 평가")
    parser.add_argument("--problem", required=True, type=Path)
    parser.add_argument("--fsc", required=True, type=Path, nargs="+", help="에이전트 순서대로 FSC 파일")
    parser.add_argument("--eval-eps", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--simulate", type=int, default=None, metavar="EPISODES", help="몬테카를로 에피소드 수")
    parser.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    d, _ = load_problem(args.problem)
    if args.gamma is not None:
        d = d.with_discount(args.gamma)
    fscs = load_fscs(args.fsc)
    if len(fscs) != d.n_agents:
        raise AlphabetMismatch(f"FSC 파일 {len(fscs)}개, 에이전트 {d.n_agents}명")
    epsilon = args.eval_eps if args.eval_eps is not None else get_settings().eval_epsilon
    value = evaluate_joint(d, fscs, epsilon)
    print(f"value: {value:.6f}")
    if args.simulate:
        estimate = simulate(d, fscs, args.simulate, args.horizon, np.random.default_rng(args.seed))
        print(f"simulated: {estimate.mean:.6f} ± {estimate.stderr:.6f} ({estimate.episodes} episodes, horizon {estimate.horizon})")
    return 0
