"""모델 모듈"""
from .pomdp import DecPomdp, Pomdp, Belief, JointSpace, Provenance
from .fsc import Fsc, FscNode, NodeValueTable
from .alpha import AlphaVector, AlphaVectorSet, SolveResult
from .best_response import BestResponsePomdp, BestResponseForm, ExtendedState, NULL_OBSERVATION
