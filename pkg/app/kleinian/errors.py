# app/kleinian/errors.py


class KleinianError(Exception):
    """Base error. `detail` is the user-facing message, `exit_code` the CLI status."""

    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class IdentityMapError(KleinianError):
    pass


class BallRangeError(KleinianError):
    pass


class QuadratureRangeError(BallRangeError):
    pass


class ElementaryGroupError(KleinianError):
    pass


class EnumerationBudgetError(KleinianError):
    pass


class UnsupportedConstructionError(KleinianError):
    pass


class NonBracketingError(KleinianError):
    pass


class DegenerateSampleError(KleinianError):
    pass


class PreconditionError(KleinianError):
    pass


class CertificateDeniedError(KleinianError):
    pass


class GroupFileError(KleinianError):
    pass
