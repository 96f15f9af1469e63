"""Exception hierarchy shared by all modules."""


class ElasticaError(Exception):
    """Base class for all library errors."""


class ValidationError(ElasticaError):
    """Malformed input: bad file, incompatible shapes, bad configuration."""


class ParseError(ValidationError):
    """A surface or path file could not be decoded.

    ``offset`` is the byte offset (binary) or line number (text) at which
    decoding failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class NonUniformGrid(ValidationError):
    """Frames of a path disagree in grid shape."""


class NumericalError(ElasticaError):
    """Degenerate geometry or a failed numerical subproblem."""


class DegenerateMetric(NumericalError):
    """EG - F^2 fell below the immersion threshold at an interior grid point."""


class SingularFit(NumericalError):
    """The normal matrix of a local polynomial fit is numerically singular."""


class NotTriaxial(NumericalError):
    """Moment-tensor eigenvalues are not separated; rotational alignment is ambiguous."""


class ZeroVolume(NumericalError):
    """Inscribed volume is too close to zero to normalize or take moments."""


class ImmersionLost(NumericalError):
    """An updated or perturbed surface stopped being an immersion."""


class RankDeficientWarning(UserWarning):
    """A basis element was dropped during orthonormalization (near-zero pivot)."""
