"""
벤치마크 서비스
suite 디렉터리의 문제들을 정해진 설정으로 풀고 참고 값과 비교합니다.

결과는 CSV(열 순서 고정), Excel, 콘솔 표로 출력합니다.
"""
import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from openpyxl import Workbook

from ..config import get_settings
from ..exceptions import ConfigError
from ..schemas.bench import BENCH_COLUMNS, BenchCase, BenchReport, BenchRow
from ..schemas.run import InitMode, RunConfig, SolverConfig
from ..storage import load_problem
from ..utils import Stopwatch, now_seoul_iso
from .jesp_service import RunResult, run

logger = logging.getLogger(__name__)

BENCH_CASES: List[BenchCase] = [
    BenchCase(
        problem="DecTiger",
        file_names=["dectiger.dpomdp", "DecTiger.dpomdp", "dec-tiger.dpomdp"],
        init=InitMode.MPOMDP_D,
        reference_value=13.44,
        threshold=13.4,
    ),
    BenchCase(
        problem="Recycling",
        file_names=["recycling.dpomdp", "Recycling.dpomdp", "recycling-robots.dpomdp"],
        init=InitMode.RANDOM,
        restarts=100,
        seed=1,
        reference_value=31.62,
        threshold=31.0,
    ),
    BenchCase(
        problem="Recycling",
        file_names=["recycling.dpomdp", "Recycling.dpomdp", "recycling-robots.dpomdp"],
        init=InitMode.MPOMDP_S,
        reference_value=26.57,
    ),
    BenchCase(
        problem="Grid3x3",
        file_names=["grid3x3.dpomdp", "Grid3x3corners.dpomdp", "grid3x3corners.dpomdp", "GridSmall.dpomdp"],
        init=InitMode.MPOMDP_D,
        reference_value=5.81,
        threshold=5.7,
    ),
    BenchCase(
        problem="BoxPushing",
        file_names=["boxPushingUAI07.dpomdp", "boxpushing.dpomdp", "BoxPushing.dpomdp"],
        init=InitMode.MPOMDP_D,
        required=False,
        smoke=True,
        max_iterations=1,
    ),
    BenchCase(
        problem="MarsRover",
        file_names=["Mars.dpomdp", "mars.dpomdp", "MarsRover.dpomdp"],
        init=InitMode.MPOMDP_D,
        required=False,
        smoke=True,
        max_iterations=1,
    ),
]


def locate(suite: Path, case: BenchCase) -> Optional[Path]:
    for name in case.file_names:
        candidate = suite / name
        if candidate.is_file():
            return candidate
    return None


def resolve_suite(suite: Path, cases: Sequence[BenchCase] = BENCH_CASES) -> Dict[int, Path]:
    """
    항목별 문제 파일 경로
    필수 항목 파일이 없으면 목록을 담아 ConfigError
    """
    if not suite.is_dir():
        raise ConfigError(f"suite 디렉터리가 없습니다: {suite}")
    found: Dict[int, Path] = {}
    missing = []
    for k, case in enumerate(cases):
        path = locate(suite, case)
        if path is not None:
            found[k] = path
        elif case.required:
            missing.append(f"{case.problem} ({' | '.join(case.file_names)})")
    if missing:
        raise ConfigError("필수 벤치마크 파일 없음: " + ", ".join(sorted(set(missing))))
    return found


def case_config(case: BenchCase, gamma: float, jobs: int = 1, solver_timeout: Optional[float] = None) -> RunConfig:
    settings = get_settings()
    solver = SolverConfig.from_settings(timeout_seconds=solver_timeout or settings.bench_solver_timeout_seconds)
    return RunConfig.from_settings(
        init=case.init,
        restarts=case.restarts,
        seed=case.seed,
        gamma=gamma,
        solver=solver,
        max_iterations=case.max_iterations,
        jobs=jobs,
    )


def _elimination_ratio(result: RunResult) -> Optional[float]:
    """최선 재시작에서 만든 최적 응답 POMDP 들의 평균 소거 비율"""
    ratios = [
        r.states_before_elimination / r.states_after_elimination
        for r in result.best.trace
        if r.states_after_elimination
    ]
    return float(sum(ratios) / len(ratios)) if ratios else None


def run_case(case: BenchCase, path: Path, cfg: RunConfig) -> BenchRow:
    """항목 1개 실행"""
    d, _ = load_problem(path)
    watch = Stopwatch()
    result = run(d, cfg)
    elapsed = watch.elapsed()
    passed = None
    if case.threshold is not None:
        passed = result.best.value >= case.threshold
    slack = max(result.best.slack.values()) if result.best.slack else None
    row = BenchRow(
        problem=case.problem,
        init=case.init,
        restarts=cfg.restarts,
        seed=cfg.seed,
        gamma=result.discount,
        value=result.best.value,
        reference_value=case.reference_value,
        threshold=case.threshold,
        passed=passed,
        fsc_sizes=[f.n_nodes for f in result.best.fscs],
        iterations=len(result.best.trace),
        wall_time_seconds=elapsed,
        elimination_ratio=_elimination_ratio(result),
        mpomdp_upper_bound=result.mpomdp_upper_bound,
        max_slack=slack,
        smoke=case.smoke,
        config=cfg,
    )
    logger.info(
        f"[BENCH] {case.problem} ({case.init.value}) - 가치 {row.value:.4f}"
        + (f" / 참고 {case.reference_value}" if case.reference_value is not None else "")
        + (f" {'통과' if passed else '미달'}" if passed is not None else "")
        + f", {elapsed:.1f}초"
    )
    return row


def run_bench(
    suite: Path,
    gamma: Optional[float] = None,
    jobs: int = 1,
    solver_timeout: Optional[float] = None,
    cases: Sequence[BenchCase] = BENCH_CASES,
) -> BenchReport:
    """
    suite 전체 실행
    jobs > 1 이면 항목을 프로세스 풀에서 병렬 실행 (각 항목 안의 재시작은 순차)
    """
    started_at = now_seoul_iso()
    gamma = gamma if gamma is not None else get_settings().bench_gamma
    paths = resolve_suite(suite, cases)
    skipped = [case.problem for k, case in enumerate(cases) if k not in paths]
    for name in skipped:
        logger.info(f"[BENCH] {name} 파일 없음 - 건너뜀")

    indices = sorted(paths)
    if jobs > 1 and len(indices) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(run_case, cases[k], paths[k], case_config(cases[k], gamma, 1, solver_timeout))
                for k in indices
            ]
            rows = [future.result() for future in futures]
    else:
        rows = [run_case(cases[k], paths[k], case_config(cases[k], gamma, 1, solver_timeout)) for k in indices]

    return BenchReport(
        suite=str(suite),
        started_at=started_at,
        finished_at=now_seoul_iso(),
        gamma=gamma,
        rows=rows,
        skipped=skipped,
    )


def to_csv(report: BenchReport) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in report.rows:
        writer.writerow(row.csv_values())
    return output.getvalue()


def to_xlsx(report: BenchReport) -> bytes:
    """CSV와 같은 행을 담은 Excel 통합 문서"""
    wb = Workbook()
    ws = wb.active
    ws.title = "벤치마크"

    ws.append(list(BENCH_COLUMNS))
    for row in report.rows:
        values = []
        for column, text in zip(BENCH_COLUMNS, row.csv_values()):
            raw = getattr(row, column)
            values.append(raw if isinstance(raw, (int, float)) and not isinstance(raw, bool) else text)
        ws.append(values)

    # 열 너비 조정
    for k, column in enumerate(BENCH_COLUMNS):
        ws.column_dimensions[chr(ord("A") + k)].width = max(12, len(column) + 2)

    output = io.BytesIO()
    wb.save(output)
    return output.getvalue()


def format_table(report: BenchReport) -> str:
    """콘솔 출력용 표"""
    header = ["problem", "init", "restarts", "value", "reference", "sizes", "iters", "time(s)", "elim", "result"]
    lines = [header]
    for row in report.rows:
        if row.passed is None:
            verdict = "smoke" if row.smoke else "-"
        else:
            verdict = "PASS" if row.passed else "FAIL"
        ratio = row.elimination_ratio
        lines.append([
            row.problem,
            row.init.value,
            str(row.restarts),
            f"{row.value:.4f}",
            "" if row.reference_value is None else f"{row.reference_value:.2f}",
            "/".join(str(x) for x in row.fsc_sizes),
            str(row.iterations),
            f"{row.wall_time_seconds:.1f}",
            "" if ratio is None or math.isinf(ratio) else f"{ratio:.2f}",
            verdict,
        ])
    widths = [max(len(line[k]) for line in lines) for k in range(len(header))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(line, widths)) for line in lines)
