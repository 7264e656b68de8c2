"""
무한 지평 Dec-POMDP 솔버 - 명령행 진입점

사용 예:
    python main.py solve --problem ../problems/dectiger.dpomdp --init mpomdp-d --gamma 0.9
    python main.py eval --problem ../problems/dectiger.dpomdp --fsc a0.fsc.json a1.fsc.json
"""
import argparse
import logging
import sys
import traceback
from typing import List, Optional

import sentry_sdk
from pydantic import ValidationError

from app.commands import COMMANDS
from app.config import get_settings
from app.exceptions import ConfigError, JespError

logger = logging.getLogger("solver")

settings = get_settings()

# Sentry 초기화 (DSN이 있을 때만)
if settings.sentry_dsn:
    sentry_sdk.init(
        dsn=settings.sentry_dsn,
        environment=settings.app_env,
        traces_sample_rate=0.1,
        send_default_pii=False,
    )


def configure_logging() -> None:
    """진단 메시지는 모두 stderr (stdout은 명령 결과 전용)"""
    logging.basicConfig(
        stream=sys.stderr,
        level=settings.effective_log_level,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jesp", description="무한 지평 Dec-POMDP 솔버")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """명령 실행 후 종료 코드 반환"""
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ValidationError as exc:
        error = ConfigError(f"잘못된 설정: {exc.errors()[0]['msg']}")
        logger.error(f"[CLI] {error.message}")
        return error.exit_code
    except JespError as exc:
        logger.error(f"[CLI] {type(exc).__name__}: {exc.message}")
        return exc.exit_code
    except Exception as exc:
        if settings.sentry_dsn:
            sentry_sdk.capture_exception(exc)
        if settings.app_env == "production":
            logger.error(f"[CLI] 내부 오류: {type(exc).__name__}")
        else:
            logger.error(f"[CLI] 내부 오류: {exc}\n{traceback.format_exc()}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
