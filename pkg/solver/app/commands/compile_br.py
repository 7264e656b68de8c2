"""
compile-br 명령
다른 에이전트의 FSC를 고정한 최적 응답 POMDP를 .pomdp 파일로 저장합니다.
"""
import argparse
import csv
import io
import logging
from pathlib import Path

from ..models.best_response import BestResponseForm
from ..services.best_response_service import compile_best_response, legend
from ..services.parser_service import emit_pomdp
from ..storage import atomic_write, load_fscs, load_problem

logger = logging.getLogger(__name__)

NAME = "compile-br"
LEGEND_COLUMNS = ("index", "state", "partner_nodes", "observation")


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="최적 응답 POMDP 생성")
    parser.add_argument("--problem", required=True, type=Path)
    parser.add_argument("--agent", required=True, type=int)
    parser.add_argument("--fsc", required=True, type=Path, nargs="+", help="나머지 에이전트의 FSC (에이전트 순서)")
    parser.add_argument("--br-form", type=BestResponseForm, choices=list(BestResponseForm),
                        default=BestResponseForm.MOMDP, metavar="{momdp,lagged}")
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--no-eliminate", action="store_true", help="도달 불가 상태 소거 생략")
    parser.add_argument("--out", required=True, type=Path, help="출력 .pomdp 파일")
    parser.set_defaults(handler=handle)


def legend_csv(rows) -> str:
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=LEGEND_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return output.getvalue()


def handle(args: argparse.Namespace) -> int:
    d, _ = load_problem(args.problem)
    if args.gamma is not None:
        d = d.with_discount(args.gamma)
    brp = compile_best_response(d, load_fscs(args.fsc), args.agent, args.br_form, eliminate=not args.no_eliminate)
    out = atomic_write(args.out, emit_pomdp(brp.pomdp))
    legend_path = atomic_write(out.with_name(out.name + ".legend.csv"), legend_csv(legend(brp, d)))
    print(f"states_before_elimination: {brp.states_before_elimination}")
    print(f"states_after_elimination: {brp.states_after_elimination}")
    print(f"elimination_ratio: {brp.elimination_ratio:.4f}")
    print(f"wrote: {out}")
    print(f"wrote: {legend_path}")
    return 0
