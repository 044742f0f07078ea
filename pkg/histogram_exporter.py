#!/usr/bin/env python3
"""
Histogram export for instanton length counts
Writes and reads the "length,count" CSV and renders it as a text bar chart
"""

import os
import logging
from typing import Dict, Mapping

import pandas as pd

from errors import DataStoreError, MalformedCSVError

logger = logging.getLogger(__name__)

COLUMNS = ['length', 'count']
BAR_WIDTH = 50
BAR_CHAR = '#'


class HistogramExporter:
    """
    Export instanton length histograms to CSV and text.
    """

    def __init__(self, bar_width: int = BAR_WIDTH):
        self.bar_width = bar_width

    @staticmethod
    def to_frame(bins: Mapping[int, int]) -> pd.DataFrame:
        frame = pd.DataFrame(sorted(bins.items()), columns=COLUMNS)
        return frame.astype({'length': 'int64', 'count': 'int64'})

    def write_csv(self, bins: Mapping[int, int], path: str):
        """Write bins sorted by length; an empty histogram is just the header"""
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            self.to_frame(bins).to_csv(path, index=False, lineterminator='\n')
            logger.info(f"Histogram with {len(bins)} bins written to {path}")
        except OSError as e:
            logger.error(f"Failed to write histogram: {e}")
            raise DataStoreError(f"Cannot write histogram to {path}: {e}")

    def read_csv(self, path: str) -> Dict[int, int]:
        try:
            frame = pd.read_csv(path)
        except pd.errors.EmptyDataError:
            return {}
        except OSError as e:
            raise DataStoreError(f"Cannot read histogram from {path}: {e}")
        except pd.errors.ParserError as e:
            raise MalformedCSVError(f"{path}: {e}")

        if list(frame.columns) != COLUMNS:
            raise MalformedCSVError(f"{path}: expected header 'length,count', got {','.join(map(str, frame.columns))}")
        if frame.empty:
            return {}
        if frame.isna().any().any():
            raise MalformedCSVError(f"{path}: missing values")

        try:
            lengths = pd.to_numeric(frame['length'], errors='raise')
            counts = pd.to_numeric(frame['count'], errors='raise')
        except (ValueError, TypeError) as e:
            raise MalformedCSVError(f"{path}: non-numeric entry ({e})")

        if not (lengths == lengths.round()).all() or not (counts == counts.round()).all():
            raise MalformedCSVError(f"{path}: lengths and counts must be integers")
        if (lengths < 0).any() or (counts < 0).any():
            raise MalformedCSVError(f"{path}: lengths and counts must be non-negative")
        if lengths.duplicated().any():
            raise MalformedCSVError(f"{path}: duplicate lengths")

        return {int(length): int(count) for length, count in zip(lengths, counts)}

    def render(self, bins: Mapping[int, int]) -> str:
        """Fixed-width text bar chart, ascending by length"""
        if not bins or sum(bins.values()) == 0:
            return "no data"

        peak = max(bins.values())
        label_width = max(len(str(length)) for length in bins)
        count_width = max(len(str(count)) for count in bins.values())

        lines = []
        for length, count in sorted(bins.items()):
            width = round(count / peak * self.bar_width)
            if count > 0:
                width = max(width, 1)
            lines.append(f"{length:>{label_width}} | {str(count):>{count_width}} {BAR_CHAR * width}")
        return '\n'.join(lines)


# Global exporter instance
histogram_exporter = HistogramExporter()
