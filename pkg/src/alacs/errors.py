"""Exception hierarchy for the toolkit.

Every error raised on purpose derives from :class:`ALACSError`, so callers
(notably the RANSAC loop and the CLI) can catch the whole family at once.
"""

from __future__ import annotations


class ALACSError(Exception):
    """Base class for all toolkit errors."""


class DegenerateDepthError(ALACSError, ValueError):
    """A camera-frame point has (near) zero depth and cannot be normalized."""


class NonConvergenceError(ALACSError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class BaselineError(ALACSError, ValueError):
    """The effective laser-camera baseline L0 - d is not positive."""


class SingularRayError(ALACSError, ValueError):
    """A viewing ray is (nearly) parallel to the laser plane."""


class NegativeDepthError(ALACSError, ValueError):
    """The laser-plane intersection lies behind the camera."""


class BehindCameraError(ALACSError, ValueError):
    """A synthetic board corner lies at non-positive depth."""


class DegenerateConfigurationError(ALACSError, ValueError):
    """Corner set is collinear or otherwise too weak to fix a homography."""


class ParallelRayError(ALACSError, ValueError):
    """A viewing ray is parallel to the board plane."""


class RankDeficiencyError(ALACSError, ValueError):
    """The linear calibration system does not have full column rank."""


class NoConsensusError(ALACSError, RuntimeError):
    """RANSAC never found an inlier set of at least ``subset_size`` samples."""


class NoIntersectionError(ALACSError, ValueError):
    """The laser line misses the calibration board."""


class AllOccludedError(ALACSError, RuntimeError):
    """Every batch of an interval scan was masked out."""


class InputError(ALACSError, ValueError):
    """An input file is missing, unreadable, or malformed."""
