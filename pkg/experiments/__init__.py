# Numerical studies reproducible from the command line

from .contour import ContourCell, ContourConfig, run_contour
from .span import SpanConfig, SpanPoint, run_span

__all__ = [
    'ContourCell',
    'ContourConfig',
    'run_contour',
    'SpanConfig',
    'SpanPoint',
    'run_span',
]
