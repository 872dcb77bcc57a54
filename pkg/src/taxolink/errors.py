"""Exception hierarchy shared across taxolink modules."""


class TaxolinkError(Exception):
    """Base class for all errors raised by taxolink."""


class InputError(TaxolinkError):
    """A problem with an input file, carrying optional file/line context."""

    def __init__(self, message, path=None, line=None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.message = message


class MalformedRecord(InputError):
    pass


class DuplicateId(InputError):
    def __init__(self, entity_id, path=None, line=None):
        self.entity_id = entity_id
        super().__init__(f"duplicate entity id {entity_id!r}", path, line)


class InvalidTaxonomy(TaxolinkError):
    def __init__(self, violations):
        self.violations = list(violations)
        kinds = ", ".join(sorted({v.kind for v in self.violations}))
        super().__init__(f"taxonomy has {len(self.violations)} violation(s): {kinds}")


class SpanOutOfBounds(InputError):
    def __init__(self, doc_id, span, path=None, line=None):
        self.doc_id = doc_id
        self.span = tuple(span)
        super().__init__(f"span {self.span} out of bounds in document {doc_id!r}", path, line)


class UnknownField(InputError):
    pass


class UnknownEntity(InputError):
    pass


class InvalidThreshold(TaxolinkError, ValueError):
    pass


class NoCandidates(TaxolinkError):
    """Raised when candidate generation finds nothing; the linker must abstain."""


class EmptyCorpus(TaxolinkError, ValueError):
    pass


class DimensionMismatch(InputError, ValueError):
    pass


class MalformedFloat(InputError, ValueError):
    pass


class UnknownDocId(TaxolinkError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidRank(TaxolinkError, ValueError):
    pass


class OutOfRange(TaxolinkError, ValueError):
    pass


class ConfigError(TaxolinkError):
    pass
