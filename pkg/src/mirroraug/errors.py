"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`MirrorAugError`, so the CLI can turn them into a nonzero exit code
with a readable message.  Most also derive from ``ValueError`` because they
signal bad input values.
"""


class MirrorAugError(Exception):
    """Base class for all structured errors."""


class ValidationError(MirrorAugError, ValueError):
    """An input value violates a type invariant."""


class FrameChainError(MirrorAugError, ValueError):
    """Two transforms do not chain (source/target frame mismatch)."""

    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(
            f"cannot chain transforms: left operand starts in frame "
            f"{expected.value!r} but right operand ends in frame {got.value!r}"
        )


class DegeneratePoseError(MirrorAugError, ValueError):
    """Bone configuration for which a derived axis is undefined."""


class DegenerateConfigurationError(MirrorAugError, ValueError):
    """Too few or collinear correspondences for registration."""


class DesynchronizationError(MirrorAugError, ValueError):
    """Paired observations are too far apart in time."""


class ProjectionError(MirrorAugError, ValueError):
    """A point lies at or behind the camera plane."""


class UnreliableEstimateError(MirrorAugError, ValueError):
    """Marker is too close to the camera for a usable mirror estimate."""


class ChiralityError(MirrorAugError, ValueError):
    """Skeleton has the wrong chirality for the requested operation."""


class RigError(MirrorAugError, ValueError):
    """Malformed armature or skinned mesh."""


class RetargetError(MirrorAugError, ValueError):
    """Skeleton lacks joints required by the armature mapping."""


class AnchoringError(MirrorAugError, ValueError):
    """Anchor joint cannot be located."""


class DomainError(MirrorAugError, ValueError):
    """Argument outside the mathematical domain of a model."""


class UnboundedRangeError(MirrorAugError, ValueError):
    """Tracking range is unbounded because threshold does not exceed noise floor."""
