"""Line-oriented text format for fuzzy controller definitions (``.fzc``).

One declaration per line::

    controller sfc_steering supervisory
    gain 0.15
    var e in [-90, 90] deg terms NL NS ZO PS PL
    term e.NL shl -90 -45
    rule IF e IS NL AND r1 IS NL THEN u2 IS PS

``#`` starts a comment.  The output variable is the one named in the THEN
clauses; every other variable is an input, in declaration order.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

from .fuzzy import SHAPES, LinguisticVariable, MembershipFunction, Rule, RuleBase

KINDS = ("base", "supervisory")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TOKEN = re.compile(r"\[|\]|,|[^\s\[\],]+")


class ParseError(Exception):
    def __init__(self, message: str, line: int = 1, column: int = 1, snippet: str = ""):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.snippet = snippet

    def __str__(self) -> str:
        where = f"line {self.line}, column {self.column}"
        if self.snippet:
            return f"{where}: {self.message}\n    {self.snippet}"
        return f"{where}: {self.message}"


class ValidationError(ParseError):
    pass


@dataclass(frozen=True)
class ControllerSpec:
    name: str
    kind: str
    rule_base: RuleBase
    output_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        # store rules in canonical row-major order so equality is structural
        object.__setattr__(self, "rule_base", _canonical(self.rule_base))
        object.__setattr__(self, "output_gain", float(self.output_gain))


def _canonical(rb: RuleBase) -> RuleBase:
    order = {v.name: i for i, v in enumerate(rb.inputs)}
    rank = {v.name: {t: j for j, t in enumerate(v.labels)} for v in rb.inputs}

    def key(rule: Rule):
        named = dict(rule.antecedent)
        return tuple(
            (0, rank[v.name][named[v.name]]) if v.name in named else (1, 0) for v in rb.inputs
        )

    rules = []
    for rule in sorted(rb.rules, key=key):
        ante = tuple(sorted(rule.antecedent, key=lambda p: order[p[0]]))
        rules.append(Rule(ante, rule.consequent))
    return RuleBase(rb.inputs, rb.output, tuple(rules))


def validate_completeness(rb: RuleBase) -> list[tuple[tuple[str, str], ...]]:
    """Input-term combinations with no rule, in row-major order."""
    return rb.missing()


# -- parsing ---------------------------------------------------------------


@dataclass
class _Tok:
    text: str
    col: int


def _tokens(line: str) -> list[_Tok]:
    return [_Tok(m.group(0), m.start() + 1) for m in _TOKEN.finditer(line)]


def _number(tok: _Tok, lineno: int, raw: str) -> float:
    try:
        value = float(tok.text)
    except ValueError:
        raise ParseError(f"expected a number, got {tok.text!r}", lineno, tok.col, raw) from None
    if not math.isfinite(value):
        raise ParseError(f"number must be finite, got {tok.text!r}", lineno, tok.col, raw)
    return value


def _ident(tok: _Tok, lineno: int, raw: str, what: str = "identifier") -> str:
    if not _IDENT.match(tok.text):
        raise ParseError(f"expected {what}, got {tok.text!r}", lineno, tok.col, raw)
    return tok.text


class _Cursor:
    def __init__(self, toks: list[_Tok], lineno: int, raw: str):
        self.toks, self.i, self.lineno, self.raw = toks, 0, lineno, raw

    def err(self, message: str, cls=ParseError) -> ParseError:
        col = self.toks[self.i].col if self.i < len(self.toks) else len(self.raw.rstrip()) + 1
        return cls(message, self.lineno, max(col, 1), self.raw)

    def next(self, what: str) -> _Tok:
        if self.i >= len(self.toks):
            raise self.err(f"expected {what}, got end of line")
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def keyword(self, word: str) -> _Tok:
        tok = self.next(word)
        if tok.text.upper() != word.upper():
            self.i -= 1
            raise self.err(f"expected {word!r}, got {tok.text!r}")
        return tok

    def peek_keyword(self, word: str) -> bool:
        return self.i < len(self.toks) and self.toks[self.i].text.upper() == word.upper()

    def done(self) -> None:
        if self.i < len(self.toks):
            raise self.err(f"unexpected trailing token {self.toks[self.i].text!r}")


def _decode(source: str | bytes) -> str:
    if isinstance(source, str):
        return source
    try:
        return bytes(source).decode("utf-8")
    except UnicodeDecodeError as exc:
        head = bytes(source)[: exc.start].decode("utf-8")
        line = head.count("\n") + 1
        col = len(head) - (head.rfind("\n") + 1) + 1
        raise ParseError("source is not valid UTF-8", line, col) from None


def parse(source: str | bytes) -> ControllerSpec:
    """Parse and validate a controller definition.

    Every failure surfaces as :class:`ParseError` (syntax) or its subclass
    :class:`ValidationError` (well-formed but inconsistent content).
    """
    text = _decode(source)
    try:
        return _parse(text)
    except ParseError:
        raise
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _parse(text: str) -> ControllerSpec:
    header = None
    gain = None
    vars_: dict[str, dict] = {}
    terms: dict[tuple[str, str], tuple[MembershipFunction, int, int]] = {}
    rules: list[tuple[Rule, int, str]] = []

    for lineno, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        body = raw.split("#", 1)[0]
        toks = _tokens(body)
        if not toks:
            continue
        cur = _Cursor(toks, lineno, raw)
        head = cur.next("declaration").text.lower()
        if head == "controller":
            if header is not None:
                raise cur.err("duplicate controller declaration", ValidationError)
            name = _ident(cur.next("controller name"), lineno, raw)
            kind_tok = cur.next("controller kind")
            if kind_tok.text not in KINDS:
                raise ParseError(f"kind must be one of {KINDS}", lineno, kind_tok.col, raw)
            cur.done()
            header = (name, kind_tok.text)
        elif head == "gain":
            if gain is not None:
                raise cur.err("duplicate gain declaration", ValidationError)
            tok = cur.next("gain value")
            gain = _number(tok, lineno, raw)
            if gain <= 0:
                raise ValidationError("gain must be positive", lineno, tok.col, raw)
            cur.done()
        elif head == "var":
            name_tok = cur.next("variable name")
            name = _ident(name_tok, lineno, raw)
            if name in vars_:
                raise ValidationError(f"variable {name!r} declared twice", lineno, name_tok.col, raw)
            cur.keyword("in")
            cur.keyword("[")
            lo = _number(cur.next("lower bound"), lineno, raw)
            cur.keyword(",")
            hi = _number(cur.next("upper bound"), lineno, raw)
            cur.keyword("]")
            if not lo < hi:
                raise ValidationError("universe needs lo < hi", lineno, name_tok.col, raw)
            unit = ""
            if not cur.peek_keyword("terms"):
                unit = _ident(cur.next("unit or 'terms'"), lineno, raw, "unit")
            cur.keyword("terms")
            labels = []
            while cur.i < len(cur.toks):
                tok = cur.next("term label")
                label = _ident(tok, lineno, raw, "term label")
                if label in labels:
                    raise ValidationError(f"duplicate term label {label!r}", lineno, tok.col, raw)
                labels.append(label)
            if not labels:
                raise cur.err("variable needs at least one term")
            vars_[name] = dict(lo=lo, hi=hi, unit=unit, labels=labels, line=lineno)
        elif head == "term":
            ref = cur.next("<var>.<label>")
            if ref.text.count(".") != 1:
                raise ParseError(f"expected <var>.<label>, got {ref.text!r}", lineno, ref.col, raw)
            vname, label = ref.text.split(".")
            if vname not in vars_:
                raise ValidationError(f"undeclared variable {vname!r}", lineno, ref.col, raw)
            if label not in vars_[vname]["labels"]:
                raise ValidationError(
                    f"term {label!r} is not declared for variable {vname!r}", lineno, ref.col, raw
                )
            if (vname, label) in terms:
                raise ValidationError(f"term {ref.text} defined twice", lineno, ref.col, raw)
            shape_tok = cur.next("shape")
            shape = shape_tok.text.lower()
            if shape not in SHAPES:
                raise ParseError(
                    f"unknown shape {shape_tok.text!r} (expected one of {', '.join(SHAPES)})",
                    lineno, shape_tok.col, raw,
                )
            params = [_number(cur.next("breakpoint"), lineno, raw) for _ in range(SHAPES[shape])]
            cur.done()
            if any(b < a for a, b in zip(params, params[1:])):
                raise ValidationError(
                    f"breakpoints of {ref.text} are not non-decreasing", lineno, shape_tok.col, raw
                )
            terms[(vname, label)] = (MembershipFunction(shape, tuple(params)), lineno, ref.col)
        elif head == "rule":
            cur.keyword("IF")
            ante = []
            while True:
                vtok = cur.next("variable")
                _ident(vtok, lineno, raw, "variable")
                cur.keyword("IS")
                ttok = cur.next("term")
                _ident(ttok, lineno, raw, "term label")
                ante.append((vtok, ttok))
                if cur.peek_keyword("AND"):
                    cur.next("AND")
                    continue
                break
            cur.keyword("THEN")
            otok = cur.next("output variable")
            _ident(otok, lineno, raw, "variable")
            cur.keyword("IS")
            olab = cur.next("output term")
            _ident(olab, lineno, raw, "term label")
            cur.done()
            for vtok, ttok in ante + [(otok, olab)]:
                if vtok.text not in vars_:
                    raise ValidationError(
                        f"undeclared variable {vtok.text!r}", lineno, vtok.col, raw
                    )
                if ttok.text not in vars_[vtok.text]["labels"]:
                    raise ValidationError(
                        f"unknown term {ttok.text!r} for variable {vtok.text!r}",
                        lineno, ttok.col, raw,
                    )
            names = [v.text for v, _ in ante]
            if len(set(names)) != len(names):
                raise ValidationError("rule mentions a variable twice", lineno, ante[0][0].col, raw)
            rule = Rule(tuple((v.text, t.text) for v, t in ante), (otok.text, olab.text))
            rules.append((rule, lineno, raw))
        else:
            raise ParseError(f"unknown declaration {toks[0].text!r}", lineno, toks[0].col, raw)

    if header is None:
        raise ValidationError("missing 'controller <name> <kind>' declaration")
    if not rules:
        raise ValidationError("controller has no rules")

    outputs = {r.consequent[0] for r, _, _ in rules}
    if len(outputs) != 1:
        _, lineno, raw = rules[-1]
        raise ValidationError(f"rules conclude on several variables: {sorted(outputs)}", lineno, 1, raw)
    out_name = outputs.pop()
    for rule, lineno, raw in rules:
        for name, _ in rule.antecedent:
            if name == out_name:
                raise ValidationError(f"output {out_name!r} used as an input", lineno, 1, raw)

    built = {}
    for name, info in vars_.items():
        mfs = []
        for label in info["labels"]:
            if (name, label) not in terms:
                raise ValidationError(
                    f"term {name}.{label} has no membership function", info["line"], 1
                )
            mfs.append((label, terms[(name, label)][0]))
        var = LinguisticVariable(name, (info["lo"], info["hi"]), tuple(mfs), info["unit"])
        gaps = var.coverage_gaps()
        if gaps:
            raise ValidationError(
                f"terms of {name!r} leave x={gaps[0]:g} uncovered", info["line"], 1
            )
        built[name] = var

    inputs = tuple(v for n, v in built.items() if n != out_name)
    used = {name for r, _, _ in rules for name, _ in r.antecedent}
    unused = [v.name for v in inputs if v.name not in used]
    if unused:
        raise ValidationError(f"variable {unused[0]!r} is declared but never used",
                              vars_[unused[0]]["line"], 1)

    seen: dict[frozenset, int] = {}
    for rule, lineno, raw in rules:
        key = frozenset(rule.antecedent)
        if key in seen:
            raise ValidationError(
                f"duplicate antecedent (first on line {seen[key]})", lineno, 1, raw
            )
        seen[key] = lineno

    rb = RuleBase(inputs, built[out_name], tuple(r for r, _, _ in rules))
    missing = rb.missing()
    if missing:
        combo = " AND ".join(f"{v} IS {t}" for v, t in missing[0])
        raise ValidationError(
            f"incomplete rule table: {len(missing)} combination(s) missing, first: {combo}",
            rules[-1][1], 1,
        )
    return ControllerSpec(header[0], header[1], rb, 1.0 if gain is None else gain)


# -- serialization ---------------------------------------------------------


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def serialize(spec: ControllerSpec) -> str:
    """Canonical text: header, gain, variables, terms, rules row-major."""
    rb = spec.rule_base
    variables = list(rb.inputs) + [rb.output]
    lines = [f"controller {spec.name} {spec.kind}", f"gain {_fmt(spec.output_gain)}"]
    for v in variables:
        lo, hi = v.universe
        unit = f" {v.unit}" if v.unit else ""
        lines.append(f"var {v.name} in [{_fmt(lo)}, {_fmt(hi)}]{unit} terms {' '.join(v.labels)}")
    for v in variables:
        for label, mf in v.terms:
            lines.append(f"term {v.name}.{label} {mf.shape} {' '.join(_fmt(p) for p in mf.params)}")
    for rule in rb.rules:
        ante = " AND ".join(f"{n} IS {t}" for n, t in rule.antecedent)
        lines.append(f"rule IF {ante} THEN {rule.consequent[0]} IS {rule.consequent[1]}")
    return "\n".join(lines) + "\n"


def table_rules(
    inputs: list[str], labels: list[list[str]], output: str, table
) -> list[Rule]:
    """Rules from a dense grid: ``table[i][j]`` is the consequent for row i, column j."""
    rules = []
    for idx in itertools.product(*[range(len(ls)) for ls in labels]):
        cell = table
        for i in idx:
            cell = cell[i]
        ante = tuple((inputs[k], labels[k][i]) for k, i in enumerate(idx))
        rules.append(Rule(ante, (output, cell)))
    return rules
