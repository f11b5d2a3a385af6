"""Exception hierarchy shared across the package.

Every error raised on a user-facing path derives from PermsigError so the
CLI can map the whole family to exit code 2 (configuration / input error).
Numerical failures (NonFiniteLoss) and artifact mismatches (MismatchedRun)
get their own exit codes.
"""


class PermsigError(Exception):
    """Base class for all errors raised by this package."""


# -- dataset / schema ------------------------------------------------------

class SchemaOverlap(PermsigError):
    """A feature column is claimed by more than one category."""


class SchemaIncomplete(PermsigError):
    """A data feature column belongs to no category."""


class MissingColumn(PermsigError):
    """A column required by the schema (or format) is absent from the data."""


class NonFiniteValue(PermsigError):
    """A feature cell is NaN, infinite, or not parseable as a finite number."""


class DuplicateVisit(PermsigError):
    """The same (subject_id, visit_index) pair appears twice."""


class DataFormatError(PermsigError):
    """Structural problem in an input file (bad header, bad integer, ...)."""


class EmptyRowSet(PermsigError):
    """Standardizer fit requested over zero rows."""


class DimensionMismatch(PermsigError):
    """Column count of an input does not match the fitted/expected shape."""


# -- configuration ---------------------------------------------------------

class InvalidConfig(PermsigError):
    """A configuration object violates its invariants."""


class InvalidSubSchema(PermsigError):
    """A sub-category split is not an exact partition of its parent."""


class DegenerateSubset(PermsigError):
    """A category subset leaves nothing on one side of the split."""


# -- models / training -----------------------------------------------------

class SingleClassTrainingSet(PermsigError):
    """Training rows contain only one class; the loss weight is undefined."""


class NonFiniteLoss(PermsigError):
    """Training loss became NaN or infinite (divergence guard)."""


class EmptySequence(PermsigError):
    """A recurrent model received a zero-length visit sequence."""


class StaleCache(PermsigError):
    """backward() called without a matching train-mode forward()."""


class ShapeMismatch(PermsigError):
    """Optimizer state or gradient shapes do not match the parameters."""


# -- metrics ---------------------------------------------------------------

class LengthMismatch(PermsigError):
    """Label and prediction vectors differ in length."""


class UndefinedMetric(PermsigError):
    """A metric term is undefined (e.g. a class absent from y)."""


# -- cross-validation / permutation engine ---------------------------------

class TooFewSubjects(PermsigError):
    """A class has fewer members than the number of folds."""


class UnknownCategory(PermsigError):
    """The named category does not exist in the schema."""


class NotAPermutation(PermsigError):
    """The supplied index array is not a bijection on the subjects."""


class TrajectoryLengthMismatch(PermsigError):
    """A longitudinal permutation maps subjects with unequal visit counts."""


class EmptyNull(PermsigError):
    """p-value requested from an empty null distribution."""


class MismatchedRun(PermsigError):
    """A persisted cross-validation run does not match the given dataset."""
