"""Exception hierarchy shared by the parser, feature and model layers."""


class HevcFaceError(Exception):
    pass


class BitstreamError(HevcFaceError):
    """Base for anything wrong with the coded input."""

    def __init__(self, message="", where=None):
        self.where = where
        if where is not None:
            message = f"{message} at {where}"
        super().__init__(message)

    def located(self, where):
        """Return a copy of this error tagged with a (CTU/CU) location."""
        if self.where is not None:
            return self
        err = type(self).__new__(type(self))
        BitstreamError.__init__(err, self.args[0] if self.args else "", where)
        if isinstance(self, UnsupportedFeature):
            err.feature = self.feature
        return err


class NoStartCode(BitstreamError):
    pass


class TruncatedNal(BitstreamError):
    pass


class OutOfBits(BitstreamError):
    pass


class MalformedCode(BitstreamError):
    pass


class UnsupportedFeature(BitstreamError):
    def __init__(self, feature, where=None):
        self.feature = feature
        super().__init__(feature, where)


class TilingGap(HevcFaceError):
    pass


class EmptyRecordList(HevcFaceError):
    pass


class ShapeMismatch(HevcFaceError):
    pass


class FormatError(HevcFaceError):
    pass


class EmptyDataset(HevcFaceError):
    pass
