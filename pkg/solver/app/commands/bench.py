"""
bench 명령
벤치마크 suite를 실행하고 CSV / Excel 보고서를 저장합니다.
기준값에 못 미치는 필수 항목이 있으면 종료 코드 1.
"""
import argparse
import logging
from pathlib import Path

from ..services.bench_service import format_table, run_bench, to_csv, to_xlsx
from ..storage import atomic_write

logger = logging.getLogger(__name__)

NAME = "bench"


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="벤치마크 실행")
    parser.add_argument("--suite", required=True, type=Path, help="벤치마크 문제 디렉터리")
    parser.add_argument("--out", type=Path, default=Path("bench.csv"))
    parser.add_argument("--gamma", type=float, default=None, help="기본: 설정의 bench_gamma (0.9)")
    parser.add_argument("--solver-timeout-s", type=float, default=None)
    parser.add_argument("--jobs", type=int, default=1, help="항목 병렬 프로세스 수")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    report = run_bench(args.suite, gamma=args.gamma, jobs=args.jobs, solver_timeout=args.solver_timeout_s)
    csv_path = atomic_write(args.out, to_csv(report))
    xlsx_path = atomic_write(args.out.with_suffix(".xlsx"), to_xlsx(report))
    print(format_table(report))
    print(f"wrote: {csv_path}")
    print(f"wrote: {xlsx_path}")
    if not report.passed:
        failed = [row.problem for row in report.rows if row.passed is False]
        logger.error(f"[BENCH] 기준 미달: {', '.join(failed)}")
        return 1
    return 0
