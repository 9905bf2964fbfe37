"""Exception types shared across the library."""


class GaussdetError(Exception):
    """Base class for all gaussdet errors."""


class NonPositiveSigma(GaussdetError):
    """A standard deviation is zero or negative."""


class RhoOutOfRange(GaussdetError):
    """A correlation coefficient lies outside the admissible open interval."""


class DegenerateCovariance(GaussdetError):
    """A covariance matrix is too close to singular to invert reliably."""


class EmptyPixelSet(GaussdetError):
    """An operation received an object annotation with no pixels."""


class ZeroAreaUnion(GaussdetError):
    """IoU is undefined: both boxes have zero area."""


class EmptyCandidateSet(GaussdetError):
    """A mixture candidate list is empty."""


class AllVoid(GaussdetError):
    """Segmentation loss has no contributing pixels: every label is void."""


class AllBackground(GaussdetError):
    """Mixture loss has no contributing cells: no foreground in the target."""


class Diverged(GaussdetError):
    """Gradient descent left the trust region (non-finite or huge objective)."""


class NoDetections(GaussdetError):
    """Clustering found foreground pixels but was given no detections."""


class UnsatisfiableOverlap(GaussdetError):
    """Scene generation could not realize the requested overlap geometry."""


class InsufficientData(GaussdetError):
    """Threshold calibration received too few pair records."""


class NoOverlappingPairs(GaussdetError):
    """Decoupling report requires at least one same-class high-IoU pair."""


class ShapeMismatch(GaussdetError):
    """Array or grid dimensions do not agree."""


class FormatError(GaussdetError):
    """A JSON or RLE document does not follow the interchange schema."""
