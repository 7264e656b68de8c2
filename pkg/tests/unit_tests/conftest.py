"""
유닛 테스트 설정
테스트 실행 전 필요한 환경 변수와 공용 fixture를 설정합니다.
"""
import os
import sys
from pathlib import Path

# 테스트용 환경 변수 설정 (Settings 로딩 전에 반드시 실행)
os.environ["JESP_APP_ENV"] = "test"
os.environ["JESP_LOG_LEVEL"] = "WARNING"
os.environ["JESP_SOLVER_TIMEOUT_SECONDS"] = "5"
os.environ.pop("JESP_SENTRY_DSN", None)

# 프로젝트 루트 추가
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'solver'))

import numpy as np
import pytest

from app.services import problem_service

PROBLEMS_DIR = Path(__file__).resolve().parents[2] / "problems"


@pytest.fixture
def problems_dir() -> Path:
    """저장소에 포함된 문제 파일 디렉터리"""
    return PROBLEMS_DIR


@pytest.fixture
def dec_tiger():
    return problem_service.dec_tiger(0.9)


@pytest.fixture
def recycling():
    return problem_service.recycling(0.9)


@pytest.fixture
def tiger():
    return problem_service.tiger(0.95)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
