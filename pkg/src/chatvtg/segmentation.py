"""Equal-length clip splitting and sliding-window proposal generation."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import TimeInterval, VideoMeta
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window geometry: window width and stride, both in seconds."""

    wide: float
    step: float

    def __post_init__(self) -> None:
        if self.wide <= 0:
            raise InvalidArgumentError(f"window width must be positive, got {self.wide}")
        if self.step <= 0:
            raise InvalidArgumentError(f"window step must be positive, got {self.step}")


def split_equal(video: VideoMeta, m: int) -> list[TimeInterval]:
    """Split [0, duration) into m contiguous clips of length duration/m.

    The last clip ends exactly at the video duration, absorbing any float
    residue from the division.
    """
    if m < 1:
        raise InvalidArgumentError(f"clip count must be >= 1, got {m}")
    bounds = [video.duration * i / m for i in range(m)]
    bounds.append(video.duration)
    return [TimeInterval(bounds[i], bounds[i + 1]) for i in range(m)]


def generate_windows(duration: float, spec: WindowSpec, flush_tail: bool = False) -> list[TimeInterval]:
    """Sliding windows over [0, duration).

    The i-th (1-based) window spans [(i-1)*step, (i-1)*step + wide) and the
    window count is floor((duration - wide) / step) + 1. A window at least as
    wide as the video degenerates to the single window [0, duration). With
    flush_tail, an extra window [duration-wide, duration) covers any
    otherwise-unreached tail.
    """
    if duration <= 0:
        raise InvalidArgumentError(f"duration must be positive, got {duration}")
    if spec.wide >= duration:
        return [TimeInterval(0.0, duration)]
    k = math.floor((duration - spec.wide) / spec.step) + 1
    windows = [
        TimeInterval(i * spec.step, i * spec.step + spec.wide) for i in range(k)
    ]
    if flush_tail and windows[-1].end < duration:
        windows.append(TimeInterval(duration - spec.wide, duration))
    return windows
