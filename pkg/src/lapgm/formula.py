"""Model formula mini-language.

    y ~ 1 + w + f(idx, model="iid", hyper.prec.prior="pc.prec", hyper.prec.param=c(1, 0.01))

The right-hand side is a sum of: an explicit intercept term ``1`` (default) or
its removal ``-1``, bare column names as linear fixed effects, and ``f(...)``
random-effect terms whose first argument names an index column.  Option keys
follow the dotted style of the source material: ``model``, ``n``,
``scale.model``, ``constr``, and ``hyper.<param>.<prior|param|fixed|initial>``
where ``<param>`` is ``prec`` (all kinds) or ``rho`` (ar1 only).  Values may
be bare identifiers, quoted strings, numbers, TRUE/FALSE, or ``c(...)``
numeric tuples.
"""

import re
from dataclasses import dataclass, field

from .errors import FormulaError
from .priors import PriorSpec

COMPONENT_KINDS = ("iid", "ar1", "rw2")
_HYPER_NAMES = {"iid": ("prec",), "ar1": ("prec", "rho"), "rw2": ("prec",)}
_OPTION_KEYS = {"model", "n", "scale.model", "constr"}
_HYPER_FIELDS = {"prior", "param", "fixed", "initial"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_.][A-Za-z0-9_.]*)
  | (?P<string>"[^"]*")
  | (?P<sym>[~+\-(),=])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaError(f"formula: unexpected character {text[pos]!r} at column {pos + 1}")
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        tokens.append(_Token(m.lastgroup, m.group(), m.start()))
    tokens.append(_Token("end", "", len(text)))
    return tokens


@dataclass
class HyperOption:
    """Per-hyperparameter overrides collected from hyper.<name>.* keys."""

    prior: str | None = None
    param: tuple | None = None
    fixed: bool = False
    initial: float | None = None

    def resolved_prior(self, default):
        if self.prior is None and self.param is None:
            return default
        family = self.prior if self.prior is not None else default.family
        params = self.param if self.param is not None else default.params
        return PriorSpec(family, params)


@dataclass
class ComponentSpec:
    name: str
    kind: str = "iid"
    n: int | None = None
    scale_model: bool = False
    constr: bool | None = None
    hyper: dict = field(default_factory=dict)

    def hyper_option(self, pname):
        return self.hyper.get(pname, HyperOption())


@dataclass
class ModelSpec:
    response: str
    intercept: bool
    covariates: list
    components: list
    family: str = "gaussian"

    def component(self, name):
        for comp in self.components:
            if comp.name == name:
                return comp
        raise KeyError(name)


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise FormulaError(f"formula: {message} at column {tok.pos + 1}")

    def expect(self, kind, text=None):
        tok = self.advance()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise FormulaError(
                f"formula: expected {want!r}, found {tok.text or 'end of input'!r} at column {tok.pos + 1}"
            )
        return tok

    def parse(self):
        resp = self.expect("ident")
        self.expect("sym", "~")
        intercept = None
        covariates = []
        components = []
        seen = {resp.text}
        while True:
            tok = self.peek()
            if tok.kind == "number" and tok.text == "1":
                self.advance()
                if intercept is not None:
                    self.fail("duplicate intercept term", tok)
                intercept = True
            elif tok.kind == "sym" and tok.text == "-":
                self.advance()
                one = self.expect("number")
                if one.text != "1":
                    self.fail("only '-1' may be subtracted", one)
                if intercept is not None:
                    self.fail("duplicate intercept term", one)
                intercept = False
            elif tok.kind == "ident" and tok.text == "f" and self.tokens[self.i + 1].text == "(":
                comp = self.parse_component()
                if comp.name in seen:
                    self.fail(f"duplicate term {comp.name!r}", tok)
                seen.add(comp.name)
                components.append(comp)
            elif tok.kind == "ident":
                self.advance()
                if tok.text in seen:
                    self.fail(f"duplicate term {tok.text!r}", tok)
                seen.add(tok.text)
                covariates.append(tok.text)
            else:
                self.fail("expected a term")
            nxt = self.peek()
            if nxt.kind == "sym" and nxt.text == "+":
                self.advance()
                continue
            if nxt.kind == "end":
                break
            self.fail(f"unexpected {nxt.text!r}")
        return ModelSpec(
            response=resp.text,
            intercept=True if intercept is None else intercept,
            covariates=covariates,
            components=components,
        )

    def parse_component(self):
        self.expect("ident", "f")
        self.expect("sym", "(")
        name = self.expect("ident")
        comp = ComponentSpec(name=name.text)
        while self.peek().text == ",":
            self.advance()
            self.parse_option(comp)
        self.expect("sym", ")")
        if comp.kind == "rw2" and comp.constr is None:
            comp.constr = True
        return comp

    def parse_option(self, comp):
        key = self.expect("ident")
        self.expect("sym", "=")
        value, vtok = self.parse_value()
        k = key.text
        if k == "model":
            if not isinstance(value, str):
                self.fail("model expects a component kind", vtok)
            if value not in COMPONENT_KINDS:
                self.fail(f"unknown component kind {value!r}", vtok)
            comp.kind = value
        elif k == "n":
            if not isinstance(value, float) or value != int(value) or value < 1:
                self.fail("n expects a positive integer", vtok)
            comp.n = int(value)
        elif k == "scale.model":
            if not isinstance(value, bool):
                self.fail("scale.model expects TRUE or FALSE", vtok)
            comp.scale_model = value
        elif k == "constr":
            if not isinstance(value, bool):
                self.fail("constr expects TRUE or FALSE", vtok)
            comp.constr = value
        elif k.startswith("hyper."):
            parts = k.split(".")
            if len(parts) != 3 or parts[1] not in ("prec", "rho") or parts[2] not in _HYPER_FIELDS:
                self.fail(f"unknown option key {k!r}", key)
            opt = comp.hyper.setdefault(parts[1], HyperOption())
            fieldname = parts[2]
            if fieldname == "prior":
                if not isinstance(value, str):
                    self.fail("prior expects a name", vtok)
                opt.prior = value
            elif fieldname == "param":
                if isinstance(value, float):
                    value = (value,)
                if not isinstance(value, tuple):
                    self.fail("param expects a number or c(...)", vtok)
                opt.param = value
            elif fieldname == "fixed":
                if not isinstance(value, bool):
                    self.fail("fixed expects TRUE or FALSE", vtok)
                opt.fixed = value
            else:
                if not isinstance(value, float):
                    self.fail("initial expects a number", vtok)
                opt.initial = value
        else:
            self.fail(f"unknown option key {k!r}", key)

    def parse_value(self):
        tok = self.advance()
        if tok.kind == "number":
            return float(tok.text), tok
        if tok.kind == "sym" and tok.text == "-":
            num = self.expect("number")
            return -float(num.text), num
        if tok.kind == "string":
            return tok.text[1:-1], tok
        if tok.kind == "ident":
            if tok.text in ("TRUE", "true", "T"):
                return True, tok
            if tok.text in ("FALSE", "false", "F"):
                return False, tok
            if tok.text == "c" and self.peek().text == "(":
                self.advance()
                items = []
                while True:
                    v, _ = self.parse_value()
                    if not isinstance(v, float):
                        self.fail("c(...) accepts numbers only", tok)
                    items.append(v)
                    nxt = self.advance()
                    if nxt.text == ")":
                        break
                    if nxt.text != ",":
                        self.fail("expected ',' or ')' in c(...)", nxt)
                return tuple(items), tok
            return tok.text, tok
        self.fail("expected a value", tok)


def parse_formula(text):
    """Parse a formula string; raises FormulaError with a column position."""
    if not isinstance(text, str) or "~" not in text:
        raise FormulaError("formula: expected 'response ~ terms'")
    return _Parser(text).parse()


def _format_value(v):
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        return repr(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)
    if isinstance(v, tuple):
        return "c(" + ", ".join(_format_value(float(x)) for x in v) + ")"
    return f'"{v}"'


def format_formula(spec):
    """Canonical pretty-printer; parse(format_formula(spec)) == spec."""
    terms = ["1" if spec.intercept else "-1"]
    terms.extend(spec.covariates)
    for comp in spec.components:
        opts = [f"model={_format_value(comp.kind)}"]
        if comp.n is not None:
            opts.append(f"n={comp.n}")
        if comp.scale_model:
            opts.append("scale.model=TRUE")
        if comp.constr is not None:
            opts.append(f"constr={_format_value(comp.constr)}")
        for pname in _HYPER_NAMES[comp.kind]:
            opt = comp.hyper.get(pname)
            if opt is None:
                continue
            if opt.prior is not None:
                opts.append(f"hyper.{pname}.prior={_format_value(opt.prior)}")
            if opt.param is not None:
                opts.append(f"hyper.{pname}.param={_format_value(opt.param)}")
            if opt.fixed:
                opts.append(f"hyper.{pname}.fixed=TRUE")
            if opt.initial is not None:
                opts.append(f"hyper.{pname}.initial={_format_value(float(opt.initial))}")
        terms.append(f"f({comp.name}, " + ", ".join(opts) + ")")
    return f"{spec.response} ~ " + " + ".join(terms)
