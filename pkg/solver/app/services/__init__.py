"""서비스 모듈"""
from .model_service import flatten_mpomdp, belief_update
from .parser_service import parse_dpomdp, parse_pomdp, emit_dpomdp, emit_pomdp
from .fsc_service import evaluate_fsc, evaluate_joint
from .solver_service import solve
