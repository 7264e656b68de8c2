"""
solve 명령
문제 파일을 JESP로 풀고 실행 결과와 FSC 파일을 저장합니다.
"""
import argparse
import logging
from pathlib import Path

from ..models.best_response import BestResponseForm
from ..schemas.run import InitMode, RunConfig, SolverConfig
from ..services.best_response_service import compile_best_response
from ..services.fsc_service import serialize, to_dot
from ..services.jesp_service import run, to_report
from ..services.solver_service import dump_alpha_vectors, solve
from ..storage import atomic_write, load_problem
from ..utils import now_seoul_iso

logger = logging.getLogger(__name__)

NAME = "solve"


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="JESP 실행")
    parser.add_argument("--problem", required=True, type=Path, help=".dpomdp / .pomdp 파일")
    parser.add_argument("--init", type=InitMode, choices=list(InitMode), default=InitMode.MPOMDP_D,
                        metavar="{random,mpomdp-d,mpomdp-s}")
    parser.add_argument("--restarts", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gamma", type=float, default=None, help="할인율 덮어쓰기 (기본: 파일 값)")
    parser.add_argument("--solver-timeout-s", type=float, default=None)
    parser.add_argument("--solver-eps", type=float, default=None)
    parser.add_argument("--max-trials", type=int, default=None, help="솔버 시행 상한 (결정적 실행)")
    parser.add_argument("--eval-eps", type=float, default=None)
    parser.add_argument("--restart-timeout-s", type=float, default=None)
    parser.add_argument("--max-init-nodes", type=int, default=None)
    parser.add_argument("--br-form", type=BestResponseForm, choices=list(BestResponseForm),
                        default=BestResponseForm.MOMDP, metavar="{momdp,lagged}")
    parser.add_argument("--jobs", type=int, default=None, help="재시작 병렬 프로세스 수")
    parser.add_argument("--max-iterations", type=int, default=None, help="지역 탐색 반복 상한")
    parser.add_argument("--out", type=Path, default=None, help="실행 결과 JSON (기본: <문제>.run.json)")
    parser.add_argument("--dump-gamma", action="store_true", help="최종 최적 응답 Γ 저장")
    parser.add_argument("--dot", action="store_true", help="FSC를 Graphviz DOT으로도 저장")
    parser.set_defaults(handler=handle)


def build_config(args: argparse.Namespace) -> RunConfig:
    """플래그 > Settings > 기본값"""
    solver = SolverConfig.from_settings(
        epsilon=args.solver_eps,
        timeout_seconds=args.solver_timeout_s,
        max_trials=args.max_trials,
    )
    return RunConfig.from_settings(
        init=args.init,
        restarts=args.restarts,
        seed=args.seed,
        gamma=args.gamma,
        restart_timeout_seconds=args.restart_timeout_s,
        solver=solver,
        eval_epsilon=args.eval_eps,
        max_init_nodes=args.max_init_nodes,
        br_form=args.br_form,
        jobs=args.jobs,
        max_iterations=args.max_iterations,
    )


def output_stem(args: argparse.Namespace) -> Path:
    if args.out is not None:
        out = Path(args.out)
        return out.with_name(out.name.removesuffix(".json").removesuffix(".run"))
    return args.problem.with_suffix("")


def handle(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    d, _ = load_problem(args.problem)
    started_at = now_seoul_iso()
    logger.info(f"[CLI] solve 시작 - {args.problem.name}, init={cfg.init.value}, 재시작 {cfg.restarts}회")
    result = run(d, cfg)

    stem = output_stem(args)
    report = to_report(result, cfg, str(args.problem), started_at)
    run_path = args.out or stem.with_name(stem.name + ".run.json")
    atomic_write(run_path, report.model_dump_json(indent=2))
    written = [run_path]
    for agent, f in enumerate(result.best.fscs):
        written.append(atomic_write(stem.with_name(f"{stem.name}.agent{agent}.fsc.json"), serialize(f)))
        if args.dot:
            written.append(atomic_write(stem.with_name(f"{stem.name}.agent{agent}.dot"), to_dot(f)))

    if args.dump_gamma:
        model = d.with_discount(cfg.gamma) if cfg.gamma is not None else d
        for agent in range(model.n_agents):
            brp = compile_best_response(model, result.best.fscs, agent, cfg.br_form)
            solved = solve(brp.pomdp, cfg.solver)
            path = stem.with_name(f"{stem.name}.agent{agent}.gamma.json")
            written.append(atomic_write(path, dump_alpha_vectors(solved.gamma_set, brp.pomdp)))

    print(f"value: {result.best.value:.6f}")
    print(f"fsc_sizes: {[f.n_nodes for f in result.best.fscs]}")
    if result.mpomdp_upper_bound is not None:
        print(f"mpomdp_upper_bound: {result.mpomdp_upper_bound:.6f}")
    for path in written:
        print(f"wrote: {path}")
    return 0
