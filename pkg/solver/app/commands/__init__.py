"""명령 모듈"""
from . import bench, compile_br, evaluate, make_suite, solve

COMMANDS = (solve, evaluate, compile_br, bench, make_suite)
