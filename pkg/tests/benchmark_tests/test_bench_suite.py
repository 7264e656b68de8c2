"""
벤치마크 회귀 테스트
공개 벤치마크 문제 파일 디렉터리에서 기준 가치를 확인합니다.

실행 방법:
1. tests/.env 에 JESP_BENCH_SUITE=<문제 파일 디렉터리> 설정 (tests/.env.example 참고)
2. pytest tests/benchmark_tests/test_bench_suite.py -v -s

참고: Recycling 100회 재시작 항목은 수십 분이 걸릴 수 있습니다.
"""
import os
from pathlib import Path

import pytest
from dotenv import load_dotenv

env_path = Path(__file__).parent.parent / ".env"
load_dotenv(env_path)

SUITE = os.getenv("JESP_BENCH_SUITE")
GAMMA = float(os.getenv("JESP_BENCH_GAMMA", "0.9"))

pytestmark = pytest.mark.skipif(not SUITE, reason="JESP_BENCH_SUITE 미설정")

from app.services import bench_service  # noqa: E402


def case_ids():
    return [f"{case.problem}-{case.init.value}" for case in bench_service.BENCH_CASES]


class TestBenchSuite:
    """벤치마크 항목별 기준 가치 테스트"""

    @pytest.mark.parametrize("index", range(len(bench_service.BENCH_CASES)), ids=case_ids())
    def test_case(self, index):
        """기준값이 있는 항목은 통과, 없는 항목은 값만 보고"""
        case = bench_service.BENCH_CASES[index]
        path = bench_service.locate(Path(SUITE), case)
        if path is None:
            if case.required:
                pytest.fail(f"{case.problem} 파일 없음: {' | '.join(case.file_names)}")
            pytest.skip(f"{case.problem} 파일 없음")
        row = bench_service.run_case(case, path, bench_service.case_config(case, GAMMA))
        print(f"\n{case.problem} ({case.init.value}): {row.value:.4f} (참고 {case.reference_value})")
        if row.mpomdp_upper_bound is not None:
            assert row.value <= row.mpomdp_upper_bound + 1e-3
        if case.threshold is not None:
            assert row.value >= case.threshold
        if case.smoke:
            assert row.iterations <= 1
