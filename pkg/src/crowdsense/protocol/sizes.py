"""Symbolic message-size accounting.

A size is a constant plus integer multiples of symbolic lengths such as
|I| or n^2. Two width profiles are provided: ``REFERENCE`` (160-bit scalars,
512-bit source elements, 1024-bit target elements, no framing) and
``BACKEND`` (the actual BLS12-381 encodings including framing bytes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping

from .. import group
from ..zkp import transcript_size
from . import messages as M


@dataclass(frozen=True)
class SizeFormula:
    const: int = 0
    terms: Mapping[str, int] = field(default_factory=dict)

    def __add__(self, other: "SizeFormula") -> "SizeFormula":
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        return SizeFormula(self.const + other.const, {k: v for k, v in terms.items() if v})

    def scale(self, k: int) -> "SizeFormula":
        return SizeFormula(self.const * k, {s: v * k for s, v in self.terms.items()})

    def evaluate(self, values: Mapping[str, int]) -> int:
        return self.const + sum(c * values[s] for s, c in self.terms.items())

    def __str__(self) -> str:
        parts = [str(self.const)] if self.const or not self.terms else []
        for sym in sorted(self.terms):
            c = self.terms[sym]
            parts.append(sym if c == 1 else "%d*%s" % (c, sym))
        return "+".join(parts)


def F(const: int = 0, **terms) -> SizeFormula:
    return SizeFormula(const, terms)


def _sym(name: str, const: int = 0) -> SizeFormula:
    return SizeFormula(const, {name: 1})


@dataclass(frozen=True)
class Widths:
    name: str
    header: SizeFormula
    kinds: Dict[str, SizeFormula]


REFERENCE = Widths(
    "reference",
    header=F(0),
    kinds={
        "left": F(512), "right": F(512), "target": F(1024), "scalar": F(160),
        "credit": _sym("|P0|"), "num": _sym("|num|"), "slot": _sym("|tau|"),
        "expires": _sym("|expires|"), "trust": _sym("|gamma|"), "quota": _sym("|w|"),
        "anchor": F(0),  # a single anchor key in the reference model
        "flag": F(1),
        "identity": _sym("|I|"),
        "sealed": F(0),  # the reference layout carries task||u inside c3 itself
        "bgn": _sym("|bgn|"),
        "area_matrix": F(0, **{"n^2": 160}), "user_matrix": F(0, **{"n^2": 160}),
        "PK1": F(4 * 160), "PK2": F(2 * 512 + 9 * 160), "PK3": F(2 * 512 + 9 * 160),
        "SPK": F(4 * 512 + 16 * 160),
    },
)

BACKEND = Widths(
    "backend",
    header=F(16),
    kinds={
        "left": F(8 * group.LEFT_BYTES), "right": F(8 * group.RIGHT_BYTES),
        "target": F(8 * group.TARGET_BYTES), "scalar": F(8 * group.SCALAR_BYTES),
        "credit": F(64), "num": F(64), "slot": F(64), "expires": F(64), "trust": F(64),
        "quota": F(32), "anchor": F(8), "flag": F(8),
        "identity": _sym("|I|", 16), "sealed": _sym("|sealed|", 16),
        "bgn": _sym("|bgn|", 16),
        "area_matrix": F(32, **{"n^2": 8 * group.SCALAR_BYTES}),
        "user_matrix": F(32, **{"n^2": 8 * group.SCALAR_BYTES}),
        **{k: F(8 * transcript_size(k)) for k in ("PK1", "PK2", "PK3", "SPK")},
    },
)

KINDS = {cls.NAME: cls for cls in M.REGISTRY.values()}


class UnknownMessageKind(Exception):
    pass


def symbolic_size(kind: str, widths: Widths = REFERENCE) -> SizeFormula:
    cls = KINDS.get(kind)
    if cls is None:
        raise UnknownMessageKind(kind)
    total = widths.header
    for _, fk in cls.FIELDS:
        total = total + widths.kinds[fk]
    return total


def _observed_symbols(msg: M.Message) -> Dict[str, int]:
    vals = {}
    for name, fk in msg.FIELDS:
        v = getattr(msg, name)
        if fk == "identity":
            vals["|I|"] = 8 * len(v)
        elif fk == "sealed":
            vals["|sealed|"] = 8 * len(v)
        elif fk == "bgn":
            vals["|bgn|"] = 8 * len(v)
        elif fk.endswith("_matrix"):
            vals["n^2"] = v.n * v.n
    return vals


@dataclass(frozen=True)
class SizeReport:
    kind: str
    measured_bits: int
    computed_bits: int
    backend_formula: str
    reference_formula: str


def account_message_sizes(msg: M.Message) -> SizeReport:
    """Exact encoded size of ``msg`` alongside both symbolic formulas."""
    if not isinstance(msg, M.Message) or msg.NAME not in KINDS:
        raise UnknownMessageKind(type(msg).__name__)
    backend = symbolic_size(msg.NAME, BACKEND)
    return SizeReport(
        kind=msg.NAME,
        measured_bits=8 * len(msg.encode()),
        computed_bits=backend.evaluate(_observed_symbols(msg)),
        backend_formula=str(backend),
        reference_formula=str(symbolic_size(msg.NAME, REFERENCE)),
    )
