"""
JESP 지역 탐색 서비스

에이전트를 돌아가며 최적 응답 POMDP를 만들고 풀어 FSC를 개선합니다.
연속 비개선 횟수가 에이전트 수에 도달하면 (근사) 내쉬 균형으로 종료합니다.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import RestartTimeout
from ..models.fsc import Fsc
from ..models.pomdp import DecPomdp
from ..schemas.run import InitMode, IterationRecord, RestartReport, RunConfig, RunReport
from ..utils import Stopwatch, now_seoul_iso
from .best_response_service import compile_best_response
from .extraction_service import ExtractionVariant, extract_fsc, extract_initial_fscs
from .fsc_service import evaluate_joint, random_fsc, to_document
from .model_service import flatten_mpomdp
from .solver_service import solve

logger = logging.getLogger(__name__)


@dataclass
class SearchState:
    """지역 탐색 진행 상태"""
    fscs: List[Fsc]
    value: float
    agent: int = 0
    no_improvement: int = 0
    trace: List[IterationRecord] = field(default_factory=list)
    last_upper_bounds: Dict[int, float] = field(default_factory=dict)


@dataclass
class LocalSearchResult:
    """지역 탐색 1회 결과"""
    fscs: List[Fsc]
    value: float
    initial_value: float
    trace: List[IterationRecord]
    converged: bool
    timed_out: bool
    slack: Dict[int, float]
    phases: Dict[str, float]
    index: int = 0
    seed: Optional[int] = None
    mpomdp_upper_bound: Optional[float] = None

    @property
    def accepted_values(self) -> List[float]:
        return [r.best_value for r in self.trace if r.accepted]


@dataclass
class RunResult:
    """전체 실행 결과 (재시작 전체)"""
    best: LocalSearchResult
    restarts: List[LocalSearchResult]
    discount: float
    mpomdp_upper_bound: Optional[float] = None


def _phase(phases: Dict[str, float], name: str, watch: Stopwatch) -> None:
    phases[name] = phases.get(name, 0.0) + watch.elapsed()


def initial_fscs(
    d: DecPomdp,
    cfg: RunConfig,
    seed: Optional[int] = None,
) -> Tuple[List[Fsc], Optional[float]]:
    """
    초기 FSC 생성
    Returns: (FSC 목록, MPOMDP 상한 또는 None)
    """
    if cfg.init == InitMode.RANDOM:
        rng = np.random.default_rng(seed if seed is not None else cfg.seed)
        fscs = [
            random_fsc(d.action_labels[j], d.observation_labels[j], cfg.max_init_nodes, rng, agent=j)
            for j in range(d.n_agents)
        ]
        return fscs, None
    mpomdp = flatten_mpomdp(d)
    result = solve(mpomdp, cfg.solver)
    variant = ExtractionVariant.DETERMINISTIC if cfg.init == InitMode.MPOMDP_D else ExtractionVariant.STOCHASTIC
    fscs = extract_initial_fscs(result.gamma_set, mpomdp, d, variant)
    logger.info(
        f"[JESP] MPOMDP 초기화 ({variant.value}) - lb={result.lb_at_b0:.4f}, ub={result.ub_at_b0:.4f}, "
        f"FSC 크기 {[f.n_nodes for f in fscs]}"
    )
    return fscs, result.ub_at_b0


def local_search(
    d: DecPomdp,
    initial: Sequence[Fsc],
    cfg: RunConfig,
    watch: Optional[Stopwatch] = None,
) -> LocalSearchResult:
    """
    라운드로빈 최적 응답 개선
    후보 가치가 v_best + δ 보다 클 때만 채택, 연속 비개선 |I|회에서 종료
    """
    watch = watch or Stopwatch()
    phases: Dict[str, float] = {}
    step = Stopwatch()
    state = SearchState(fscs=list(initial), value=evaluate_joint(d, initial, cfg.eval_epsilon))
    _phase(phases, "evaluate", step)
    initial_value = state.value
    order = cfg.agent_order or list(range(d.n_agents))
    if len(order) != d.n_agents:
        raise ValueError(f"agent_order 길이 {len(order)} != 에이전트 수 {d.n_agents}")
    iteration = 0
    timed_out = False
    while state.no_improvement < d.n_agents:
        if cfg.max_iterations is not None and iteration >= cfg.max_iterations:
            break
        if watch.expired(cfg.restart_timeout_seconds):
            timed_out = True
            logger.warning(f"[JESP] 재시작 시간 예산 초과 - 현재 최선 {state.value:.4f} 반환")
            break
        agent = order[iteration % d.n_agents]
        state.agent = agent

        step = Stopwatch()
        brp = compile_best_response(d, state.fscs, agent, cfg.br_form)
        _phase(phases, "compile", step)

        step = Stopwatch()
        solved = solve(brp.pomdp, cfg.solver)
        _phase(phases, "solve", step)

        step = Stopwatch()
        candidate = extract_fsc(solved.gamma_set, brp.pomdp, agent=agent)
        _phase(phases, "extract", step)

        step = Stopwatch()
        trial = list(state.fscs)
        trial[agent] = candidate
        value = evaluate_joint(d, trial, cfg.eval_epsilon)
        _phase(phases, "evaluate", step)

        accepted = value > state.value + cfg.acceptance_margin
        if accepted:
            state.fscs = trial
            state.value = value
            state.no_improvement = 0
            state.last_upper_bounds.clear()
        else:
            state.no_improvement += 1
            state.last_upper_bounds[agent] = solved.ub_at_b0
        iteration += 1
        state.trace.append(IterationRecord(
            iteration=iteration,
            agent=agent,
            candidate_value=value,
            accepted=accepted,
            best_value=state.value,
            fsc_sizes=[f.n_nodes for f in state.fscs],
            states_before_elimination=brp.states_before_elimination,
            states_after_elimination=brp.states_after_elimination,
            solver_lower_bound=solved.lb_at_b0,
            solver_upper_bound=solved.ub_at_b0,
            elapsed=watch.elapsed(),
        ))
        logger.debug(
            f"[JESP] 반복 {iteration} 에이전트 {agent} - 후보 {value:.4f} "
            f"{'채택' if accepted else '기각'} (최선 {state.value:.4f}, nNI={state.no_improvement})"
        )

    converged = state.no_improvement >= d.n_agents
    slack = {agent: ub - state.value for agent, ub in sorted(state.last_upper_bounds.items())}
    return LocalSearchResult(
        fscs=state.fscs,
        value=state.value,
        initial_value=initial_value,
        trace=state.trace,
        converged=converged,
        timed_out=timed_out,
        slack=slack,
        phases=phases,
    )


def _restart(d: DecPomdp, cfg: RunConfig, index: int, seed: Optional[int]) -> LocalSearchResult:
    """재시작 1회 (초기화 + 지역 탐색)"""
    watch = Stopwatch()
    fscs, upper = initial_fscs(d, cfg, seed)
    if watch.expired(cfg.restart_timeout_seconds):
        raise RestartTimeout(f"재시작 {index}: 초기화 중 시간 예산 초과")
    result = local_search(d, fscs, cfg, watch)
    result.index = index
    result.seed = seed
    result.mpomdp_upper_bound = upper
    logger.info(
        f"[JESP] 재시작 {index} 완료 - 가치 {result.value:.4f}, 반복 {len(result.trace)}회, "
        f"FSC 크기 {[f.n_nodes for f in result.fscs]}"
    )
    return result


def restart_seeds(cfg: RunConfig) -> List[Optional[int]]:
    """마스터 시드에서 재시작별 시드 유도"""
    if cfg.init != InitMode.RANDOM:
        return [None]
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    return [int(child.generate_state(1)[0]) for child in children]


def run(d: DecPomdp, cfg: RunConfig) -> RunResult:
    """
    재시작 실행 후 최고 가치 결과 반환 (동률은 낮은 재시작 번호)
    jobs > 1 이면 재시작을 프로세스 풀에서 병렬 실행
    """
    if cfg.gamma is not None:
        d = d.with_discount(cfg.gamma)
    seeds = restart_seeds(cfg)
    outcomes: List[Optional[LocalSearchResult]] = [None] * len(seeds)
    if cfg.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_restart, d, cfg, k, seed) for k, seed in enumerate(seeds)]
            for k, future in enumerate(futures):
                try:
                    outcomes[k] = future.result()
                except RestartTimeout as e:
                    logger.warning(f"[JESP] {e.message}")
    else:
        for k, seed in enumerate(seeds):
            try:
                outcomes[k] = _restart(d, cfg, k, seed)
            except RestartTimeout as e:
                logger.warning(f"[JESP] {e.message}")

    finished = [r for r in outcomes if r is not None]
    if not finished:
        raise RestartTimeout("결과를 낸 재시작이 없습니다")
    best = max(finished, key=lambda r: (r.value, -r.index))
    return RunResult(
        best=best, restarts=finished, discount=d.discount, mpomdp_upper_bound=best.mpomdp_upper_bound
    )


def to_report(result: RunResult, cfg: RunConfig, problem: str, started_at: str) -> RunReport:
    """실행 결과 파일 스키마로 변환"""
    restarts = [
        RestartReport(
            index=r.index,
            seed=r.seed,
            value=r.value,
            initial_value=r.initial_value,
            converged=r.converged,
            timed_out=r.timed_out,
            iterations=len(r.trace),
            fsc_sizes=[f.n_nodes for f in r.fscs],
            slack={str(k): v for k, v in r.slack.items()},
            phases=r.phases,
            trace=r.trace,
        )
        for r in result.restarts
    ]
    return RunReport(
        problem=problem,
        started_at=started_at,
        finished_at=now_seoul_iso(),
        config=cfg,
        discount=result.discount,
        value=result.best.value,
        best_restart=result.best.index,
        mpomdp_upper_bound=result.mpomdp_upper_bound,
        slack={str(k): v for k, v in result.best.slack.items()},
        fscs=[to_document(f) for f in result.best.fscs],
        restarts=restarts,
    )
