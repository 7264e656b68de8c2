"""
α-벡터 모델
하한 가치 함수 Γ (PWLC)
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class AlphaVector:
    """α-벡터와 그 벡터를 만든 행동"""
    values: np.ndarray
    action: int


class AlphaVectorSet:
    """
    α-벡터 집합 Γ
    value(b) = max_α α·b, 동률은 낮은 인덱스
    """

    def __init__(self, vectors: Optional[List[AlphaVector]] = None):
        self._vectors: List[AlphaVector] = list(vectors or [])
        self._matrix: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._vectors)

    def __iter__(self):
        return iter(self._vectors)

    def __getitem__(self, index: int) -> AlphaVector:
        return self._vectors[index]

    @property
    def matrix(self) -> np.ndarray:
        """[|Γ|, |S|] 행렬 (캐시)"""
        if self._matrix is None:
            self._matrix = np.vstack([v.values for v in self._vectors])
        return self._matrix

    @property
    def actions(self) -> List[int]:
        return [v.action for v in self._vectors]

    def add(self, vector: AlphaVector) -> int:
        self._vectors.append(vector)
        self._matrix = None
        return len(self._vectors) - 1

    def keep(self, indices: List[int]) -> None:
        """지정한 인덱스만 남김 (순서 유지)"""
        self._vectors = [self._vectors[i] for i in sorted(indices)]
        self._matrix = None

    def best(self, belief: np.ndarray) -> Tuple[int, float]:
        """argmax_α α·b 와 그 값"""
        scores = self.matrix @ belief
        index = int(np.argmax(scores))
        return index, float(scores[index])

    def value(self, belief: np.ndarray) -> float:
        return self.best(belief)[1]


@dataclass
class SolveResult:
    """솔버 결과"""
    gamma_set: AlphaVectorSet
    lb_at_b0: float
    ub_at_b0: float
    iterations: int
    elapsed: float
    converged: bool
    history: List[Tuple[int, float, float, int, int]] = field(default_factory=list)
