"""
make-suite 명령
코드로 만든 벤치마크 문제를 디렉터리에 파일로 씁니다.
"""
import argparse
import logging
from pathlib import Path

from ..services.problem_service import suite_files
from ..storage import atomic_write

logger = logging.getLogger(__name__)

NAME = "make-suite"


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="벤치마크 문제 파일 생성")
    parser.add_argument("--out", required=True, type=Path, help="출력 디렉터리")
    parser.add_argument("--gamma", type=float, default=None, help="파일에 기록할 할인율 (기본: 문제별 값)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    for name, text in suite_files(args.gamma).items():
        path = atomic_write(args.out / name, text)
        print(f"wrote: {path}")
    logger.info(f"[CLI] 벤치마크 파일 생성 완료 - {args.out}")
    return 0
