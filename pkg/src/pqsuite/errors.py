"""Exception types shared by all pqsuite modules."""


class PqSuiteError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(PqSuiteError):
    """Pixel planes or frames disagree in size."""


class InvariantViolation(PqSuiteError):
    """Input data breaks a structural invariant of the panoptic model."""


class CodecError(PqSuiteError):
    """Malformed image data fed to the panoptic PNG codec."""


class ChannelError(CodecError):
    """Panoptic PNG input is not an 8-bit RGB raster."""


class IdOverflow(PqSuiteError):
    """Segment id does not fit the 24-bit RGB encoding."""


class MissingFile(PqSuiteError):
    """A file referenced by a manifest cannot be found."""


class UnknownSegmentId(PqSuiteError):
    """A PNG id has no matching row in the segment table."""


class CategoryMissing(PqSuiteError):
    """An annotation references a category that the manifest does not declare."""


class UnmappedCategory(PqSuiteError):
    """A class value in a mask pair has no entry in the category mapping."""


class InvalidCounts(PqSuiteError):
    """Intersection/area counts violate their preconditions."""


class InvalidParameter(PqSuiteError):
    """A metric parameter is outside its legal range."""


class EmptyMask(PqSuiteError):
    """An operation that needs a nonempty mask received an empty one."""


class EmptyDataset(PqSuiteError):
    """No images (or no scorable images) to evaluate."""


class ImageSetMismatch(PqSuiteError):
    """Ground-truth and prediction manifests list different image ids."""


class InfeasibleSpec(PqSuiteError):
    """A synthetic scene spec cannot be satisfied within the rejection budget."""


class FrameTooLarge(PqSuiteError):
    """Input exceeds the size guard of a brute-force oracle."""
