"""
FSC 파일 스키마 (JSON)
"""
from typing import Dict, List, Optional, Union
from pydantic import BaseModel, Field, model_validator


class TransitionEntry(BaseModel):
    """확률적 노드 전이 항목"""
    to: int = Field(..., ge=0, description="후속 노드 id")
    p: float = Field(..., ge=0.0, le=1.0, description="전이 확률")


class FscNodeSchema(BaseModel):
    """노드 하나"""
    id: int = Field(..., ge=0)
    action: Optional[str] = Field(None, description="결정적 행동 이름")
    action_dist: Optional[Dict[str, float]] = Field(None, description="확률적 행동 분포")
    transitions: Dict[str, Union[int, List[TransitionEntry]]]
    weight: float = Field(0.0, ge=0.0)
    belief: Optional[Dict[str, float]] = Field(None, description="대표 신념 (상태 이름 → 확률)")
    source_alpha_index: Optional[int] = None

    @model_validator(mode="after")
    def check_action(self) -> "FscNodeSchema":
        if (self.action is None) == (self.action_dist is None):
            raise ValueError("action 과 action_dist 중 정확히 하나가 필요합니다")
        return self


class FscDocument(BaseModel):
    """FSC 파일 전체"""
    agent: int = Field(0, ge=0)
    start: int = Field(0, ge=0)
    deterministic: bool
    actions: List[str] = Field(..., min_length=1, description="행동 알파벳")
    observations: List[str] = Field(..., min_length=1, description="관측 알파벳")
    states: Optional[List[str]] = Field(None, description="대표 신념의 상태 이름")
    nodes: List[FscNodeSchema] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_nodes(self) -> "FscDocument":
        if self.start != 0:
            raise ValueError("시작 노드는 0이어야 합니다")
        ids = [node.id for node in self.nodes]
        if ids != list(range(len(ids))):
            raise ValueError("노드 id는 0부터 연속이어야 합니다")
        return self
