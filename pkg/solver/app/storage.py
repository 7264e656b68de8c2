"""
파일 입출력 모듈
문제 파일 로드(캐시)와 원자적 쓰기(임시 파일 → rename)를 담당합니다.
"""
import logging
import os
import tempfile
from functools import lru_cache
from pathlib import Path
from typing import List, Tuple, Union

from .exceptions import ConfigError
from .models.fsc import Fsc
from .models.pomdp import DecPomdp
from .services.fsc_service import deserialize
from .services.parser_service import ParseDiagnostics, parse_dpomdp

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_text(path: PathLike) -> str:
    """텍스트 파일 읽기 (없으면 ConfigError)"""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"파일을 찾을 수 없습니다: {p}")
    return p.read_text(encoding="utf-8")


@lru_cache(maxsize=16)
def _load_cached(resolved: str, mtime_ns: int) -> Tuple[DecPomdp, ParseDiagnostics]:
    return parse_dpomdp(read_text(resolved))


def load_problem(path: PathLike) -> Tuple[DecPomdp, ParseDiagnostics]:
    """
    .dpomdp / .pomdp 문제 로드
    같은 파일(경로 + 수정 시각)은 한 번만 파싱합니다.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"문제 파일을 찾을 수 없습니다: {p}")
    if p.suffix not in (".dpomdp", ".pomdp"):
        logger.warning(f"[CLI] 확장자가 .dpomdp/.pomdp 가 아닙니다: {p.name}")
    model, diagnostics = _load_cached(str(p.resolve()), p.stat().st_mtime_ns)
    for warning in diagnostics.warnings:
        logger.warning(f"[PARSER] {p.name}: {warning}")
    return model, diagnostics


def load_fscs(paths: List[PathLike]) -> List[Fsc]:
    return [deserialize(read_text(p)) for p in paths]


def atomic_write(path: PathLike, content: Union[str, bytes]) -> Path:
    """같은 디렉터리의 임시 파일에 쓴 뒤 rename"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8"})) as handle:
            handle.write(content)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"[CLI] 파일 저장: {target}")
    return target
