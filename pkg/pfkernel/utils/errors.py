"""
Exception hierarchy
Every error raised on purpose by the package derives from PFKernelError and
carries a short machine-readable code.
"""


class PFKernelError(Exception):
    """Base error"""
    code = "pfkernel_error"


class DiagramParseError(PFKernelError):
    """Malformed line in a diagram file"""
    code = "diagram_parse"

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DiagramValidationError(PFKernelError):
    """Point violates birth/death invariants"""
    code = "diagram_invalid"


class EssentialPointError(PFKernelError):
    """Operation needs finite points but got death = inf"""
    code = "essential_point"


class UnsupportedDimensionError(PFKernelError):
    code = "unsupported_dimension"


class PointCloudError(PFKernelError):
    code = "point_cloud_invalid"


class SupportMismatchError(PFKernelError):
    """Measures live on different support lists"""
    code = "support_mismatch"


class EmptyMeasureError(PFKernelError):
    code = "empty_measure"


class SmoothingUnderflowError(PFKernelError):
    code = "smoothing_underflow"


class DegenerateDistancesError(PFKernelError):
    code = "degenerate_distances"


class IndefiniteGramError(PFKernelError):
    code = "indefinite_gram"


class TrainingError(PFKernelError):
    code = "training"


class DimensionMismatchError(PFKernelError):
    code = "dimension_mismatch"


class ManifestError(PFKernelError):
    code = "manifest"


class UsageError(PFKernelError):
    """Bad command-line invocation"""
    code = "usage"
