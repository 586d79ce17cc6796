"""Kernel exceptions.

Every error carries a stable ``code`` string (the class name) so that the CLI
can emit machine-readable diagnostics, plus an optional source location.
"""

from __future__ import annotations


class KernelError(Exception):
    code = "KernelError"

    def __init__(self, message: str, *, subject: str | None = None,
                 file: str | None = None, line: int | None = None,
                 column: int | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.subject = subject
        self.file = file
        self.line = line
        self.column = column

    def at(self, file: str | None = None, line: int | None = None,
           column: int | None = None) -> KernelError:
        """Fill in location fields that are still unset; returns self."""
        if self.file is None:
            self.file = file
        if self.line is None:
            self.line = line
            self.column = column
        return self

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "subject": self.subject,
            "file": self.file,
            "line": self.line,
            "column": self.column,
        }

    def __str__(self) -> str:
        loc = ""
        if self.line is not None:
            loc = f"{self.file or '<input>'}:{self.line}:{self.column}: "
        return f"{loc}{self.code}: {self.message}"


def _error(name: str, doc: str) -> type[KernelError]:
    return type(name, (KernelError,), {"code": name, "__doc__": doc})


# syntax
LexError = _error("LexError", "Unrecognized character in source text.")
ParseError = _error("ParseError", "Malformed source text.")
DuplicateName = _error("DuplicateName", "A name is declared twice in one theory.")
UnknownSort = _error("UnknownSort", "A sort is used before it is declared.")
UnknownSymbol = _error("UnknownSymbol", "A symbol is used before it is declared.")
SortMismatch = _error("SortMismatch", "Sorts of a term and its position disagree.")
ArityMismatch = _error("ArityMismatch", "Wrong number of arguments to an operator.")
BadDefinition = _error("BadDefinition", "A definition is not an explicit defining equation.")
NonDisjoint = _error("NonDisjoint", "Join operands declare the same name.")
NoCommonPrefix = _error("NoCommonPrefix", "Join operands do not share the given base.")

# graph
UnknownTheory = _error("UnknownTheory", "Reference to a theory that is not in the graph.")
DuplicateTheoryName = _error("DuplicateTheoryName", "A theory name is already taken.")
NotAnExtension = _error("NotAnExtension", "Target is not a prefix extension of the source.")
WouldCreateCycle = _error("WouldCreateCycle", "Edge would make the extension graph cyclic.")
NoPath = _error("NoPath", "No extension path between the given theories.")
MultipleSources = _error("MultipleSources", "Development has more than one source.")
MultipleSinks = _error("MultipleSinks", "Development has more than one sink.")

# views
UnknownView = _error("UnknownView", "Reference to a view that is not in the graph.")
DuplicateViewName = _error("DuplicateViewName", "A view name is already taken.")
UnmappedSymbol = _error("UnmappedSymbol", "A symbol has no image under a (partial) view.")
SignatureMismatch = _error("SignatureMismatch", "A symbol map does not preserve signatures.")
UnknownSymbolInMap = _error("UnknownSymbolInMap", "A symbol map mentions an undeclared symbol.")
NotTotal = _error("NotTotal", "A view does not map every source symbol.")
ComposeMismatch = _error("ComposeMismatch", "Views cannot be composed.")
DischargeFailed = _error("DischargeFailed", "A discharge directive could not be honoured.")

# realms
UnknownRealm = _error("UnknownRealm", "Reference to a realm that is not tagged in the graph.")
PillarNotFound = _error("PillarNotFound", "No pillar with the requested top theory.")
NotConservativeDecl = _error("NotConservativeDecl", "Declaration is not a conservative extension.")
FaceWouldBeNonPrimitive = _error("FaceWouldBeNonPrimitive", "Face declaration is not a symbol or axiom.")
MissingCounterpart = _error("MissingCounterpart", "A pillar lacks the counterpart of a face extension.")
NameClash = _error("NameClash", "Fresh name generation could not avoid a clash.")
FaceMergeConflict = _error("FaceMergeConflict", "Merged face symbols are incompatible.")
MergeError = _error("MergeError", "Realms cannot be merged along the given views.")
JustificationFailed = _error("JustificationFailed", "A theorem's finite-check justification is refuted.")

# model oracle
MissingTable = _error("MissingTable", "A structure lacks a table or carrier for a symbol.")
BudgetExceeded = _error("BudgetExceeded", "Model search exceeded its evaluation budget.")
ObligationOpen = _error("ObligationOpen", "A view still has open obligations.")
TransportFailure = _error("TransportFailure", "A transported structure fails the source theory.")

OracleBudgetExceeded = BudgetExceeded
