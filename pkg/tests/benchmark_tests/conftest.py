"""
벤치마크 테스트 설정
"""
import os
import sys

os.environ.setdefault("JESP_APP_ENV", "test")
os.environ.setdefault("JESP_LOG_LEVEL", "INFO")

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'solver'))
