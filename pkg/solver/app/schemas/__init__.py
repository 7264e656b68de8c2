"""스키마 모듈"""
from .fsc import *
from .run import *
from .bench import *
