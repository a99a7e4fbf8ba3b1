"""Shared fixtures: small synthetic scenes reused across test modules."""

import numpy as np
import pytest

from derainkit.frames import Frame, FrameSequence
from derainkit.physics import smooth_noise_background


@pytest.fixture(scope="session")
def textured_frame() -> Frame:
    """A 160x120 luma frame with both smooth and fine structure."""
    base = smooth_noise_background(160, 120, low=60.0, high=190.0, smooth_sigma=2.0, seed=4).data
    rng = np.random.default_rng(4)
    return Frame(np.clip(base + rng.normal(0.0, 12.0, base.shape), 0.0, 255.0))


@pytest.fixture()
def static_sequence(textured_frame) -> FrameSequence:
    return FrameSequence(tuple([textured_frame] * 12), fps=10.0)


def make_gradient_frame(width: int = 32, height: int = 24) -> Frame:
    x = np.linspace(0.0, 200.0, width)[None, :]
    y = np.linspace(0.0, 40.0, height)[:, None]
    return Frame(np.clip(x + y, 0.0, 255.0))
