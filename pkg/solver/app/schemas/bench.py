"""
벤치마크 보고서 스키마
"""
from typing import List, Optional

from pydantic import BaseModel, Field

from .run import InitMode, RunConfig

# CSV 열 순서 (회귀 비교용으로 고정)
BENCH_COLUMNS = (
    "problem",
    "init",
    "restarts",
    "seed",
    "gamma",
    "value",
    "reference_value",
    "threshold",
    "passed",
    "fsc_sizes",
    "iterations",
    "wall_time_seconds",
    "elimination_ratio",
    "mpomdp_upper_bound",
    "max_slack",
    "smoke",
)


class BenchCase(BaseModel):
    """벤치마크 항목 1개 정의"""
    problem: str
    file_names: List[str] = Field(description="suite 디렉터리에서 찾을 후보 파일 이름 (앞쪽 우선)")
    init: InitMode
    restarts: int = 1
    seed: int = 0
    reference_value: Optional[float] = None
    threshold: Optional[float] = Field(None, description="None 이면 값만 보고")
    required: bool = True
    smoke: bool = False
    max_iterations: Optional[int] = None


class BenchRow(BaseModel):
    """벤치마크 결과 1행"""
    problem: str
    init: InitMode
    restarts: int
    seed: int
    gamma: float
    value: float
    reference_value: Optional[float] = None
    threshold: Optional[float] = None
    passed: Optional[bool] = None
    fsc_sizes: List[int]
    iterations: int
    wall_time_seconds: float
    elimination_ratio: Optional[float] = None
    mpomdp_upper_bound: Optional[float] = None
    max_slack: Optional[float] = None
    smoke: bool = False
    config: RunConfig

    def csv_values(self) -> List[str]:
        values = []
        for column in BENCH_COLUMNS:
            value = getattr(self, column)
            if value is None:
                values.append("")
            elif column == "fsc_sizes":
                values.append("/".join(str(x) for x in value))
            elif isinstance(value, InitMode):
                values.append(value.value)
            elif isinstance(value, float):
                values.append(format(value, ".6f"))
            else:
                values.append(str(value))
        return values


class BenchReport(BaseModel):
    """벤치마크 보고서"""
    suite: str
    started_at: str
    finished_at: str
    gamma: float
    rows: List[BenchRow] = Field(default_factory=list)
    skipped: List[str] = Field(default_factory=list, description="파일이 없어 건너뛴 선택 항목")

    @property
    def passed(self) -> bool:
        return all(row.passed is not False for row in self.rows)
