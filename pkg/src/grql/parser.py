"""Lexer and recursive-descent parser for schemas and queries.

The accepted grammar is documented in GRAMMAR.md. Keywords are
case-insensitive, identifiers case-sensitive, comments run from '#' to end of
line. Set-literal braces never nest semantically; the desugarer flattens them.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import surface as s
from .model import (
    BoolVal,
    IntVal,
    Label,
    LabelKind,
    ObjectTypeDecl,
    ScalarType,
    Schema,
    StoredRefType,
    StrVal,
    llabel,
    olabel,
)
from .surface import ParseError, Span
from .wellformed import Diagnostic

KEYWORDS = {
    "select", "filter", "order", "by", "for", "in", "union", "with",
    "if", "then", "else", "insert", "update", "set", "is", "true", "false",
    "type", "required", "multi",
}

SCALAR_NAMES = {"int": ScalarType.INT, "int64": ScalarType.INT,
                "str": ScalarType.STR, "bool": ScalarType.BOOL}

_SYMBOLS = (":=", ".<", "??", "{", "}", "(", ")", "[", "]", ",", ";",
            ":", ".", "<", ">", "=", "+", "-", "@")


@dataclass
class Token:
    kind: str  # "ident", "int", "str", "kw:<word>", or a symbol literal
    text: str
    span: Span


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", text[i:j], (i, j)))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word.lower() in KEYWORDS:
                toks.append(Token("kw:" + word.lower(), word, (i, j)))
            else:
                toks.append(Token("ident", word, (i, j)))
            i = j
            continue
        if ch == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    if j + 1 >= n:
                        raise ParseError("unterminated escape", (i, n))
                    esc = text[j + 1]
                    if esc == '"':
                        out.append('"')
                    elif esc == "\\":
                        out.append("\\")
                    elif esc == "n":
                        out.append("\n")
                    else:
                        raise ParseError(f"unknown escape \\{esc}", (j, j + 2))
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string literal", (i, n))
            toks.append(Token("str", "".join(out), (i, j + 1)))
            i = j + 1
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token(sym, sym, (i, i + len(sym))))
                i += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", (i, i + 1))
    toks.append(Token("eof", "", (n, n)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.pos = 0
        self.scopes: list[str] = []       # explicit binder names in scope
        self.implicit_depth = 0           # nesting of implicit-subject contexts

    # -- token plumbing ------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def advance(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str = "") -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(
                f"unexpected {tok.kind or 'end of input'} {tok.text!r}",
                tok.span, expected=what or kind,
            )
        return self.advance()

    def accept(self, kind: str) -> Token | None:
        if self.at(kind):
            return self.advance()
        return None

    # -- queries -------------------------------------------------------------

    def parse_query(self) -> s.SurfaceExpr:
        e = self.parse_expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"trailing input {tok.text!r}", tok.span)
        return e

    def parse_expr(self) -> s.SurfaceExpr:
        start = self.peek().span[0]
        e = self.parse_chain()
        if self.at("kw:union"):
            items = [e]
            while self.accept("kw:union"):
                items.append(self.parse_chain())
            return s.SetLit(items, span=(start, self.prev_end()))
        return e

    def prev_end(self) -> int:
        return self.toks[self.pos - 1].span[1] if self.pos > 0 else 0

    def parse_chain(self) -> s.SurfaceExpr:
        start = self.peek().span[0]
        e = self.parse_coalesce()
        while True:
            if self.accept("kw:filter"):
                self.implicit_depth += 1
                cond = self.parse_coalesce()
                self.implicit_depth -= 1
                e = s.Filter(e, cond, span=(start, self.prev_end()))
            elif self.at("kw:order"):
                self.advance()
                self.expect("kw:by", "'by'")
                self.implicit_depth += 1
                key = self.parse_coalesce()
                self.implicit_depth -= 1
                e = s.OrderBy(e, key, span=(start, self.prev_end()))
            else:
                return e

    def parse_coalesce(self) -> s.SurfaceExpr:
        start = self.peek().span[0]
        e = self.parse_comparison()
        while self.accept("??"):
            rhs = self.parse_comparison()
            e = s.Call("coalesce", [e, rhs], span=(start, self.prev_end()))
        return e

    def parse_comparison(self) -> s.SurfaceExpr:
        start = self.peek().span[0]
        e = self.parse_additive()
        if self.accept("="):
            rhs = self.parse_additive()
            return s.Call("eq", [e, rhs], span=(start, self.prev_end()))
        if self.accept("<"):
            rhs = self.parse_additive()
            return s.Call("lt", [e, rhs], span=(start, self.prev_end()))
        return e

    def parse_additive(self) -> s.SurfaceExpr:
        start = self.peek().span[0]
        e = self.parse_postfix()
        while self.accept("+"):
            rhs = self.parse_postfix()
            e = s.Call("add", [e, rhs], span=(start, self.prev_end()))
        return e

    def parse_postfix(self) -> s.SurfaceExpr:
        start = self.peek().span[0]
        e = self.parse_primary()
        while True:
            if self.at("."):
                self.advance()
                lbl = self.parse_label()
                e = s.Path(e, lbl, span=(start, self.prev_end()))
            elif self.at(".<"):
                self.advance()
                name = self.expect("ident", "link label").text
                self.expect("[", "'[is TypeName]'")
                self.expect("kw:is", "'is'")
                tname = self.expect("ident", "type name").text
                self.expect("]", "']'")
                e = s.Backlink(e, olabel(name), tname, span=(start, self.prev_end()))
            elif self.at("{"):
                entries = self.parse_shape_entries()
                e = s.Shape(e, entries, span=(start, self.prev_end()))
            else:
                return e

    def parse_label(self) -> Label:
        if self.accept("@"):
            name = self.expect("ident", "link property name").text
            return llabel(name)
        return olabel(self.expect("ident", "label").text)

    def parse_shape_entries(self) -> list[tuple[Label, s.SurfaceExpr]]:
        """`{ entry, ... }` where an entry is `l := e`, shorthand `l`
        (== `l := .l`), or nested `l: { ... }` (== `l := .l { ... }`)."""
        open_tok = self.expect("{")
        entries: list[tuple[Label, s.SurfaceExpr]] = []
        seen: set[Label] = set()
        self.implicit_depth += 1
        while not self.at("}"):
            lbl_start = self.peek().span[0]
            lbl = self.parse_label()
            if lbl in seen:
                raise ParseError(f"duplicate shape label {lbl}", (lbl_start, self.prev_end()))
            seen.add(lbl)
            if self.accept(":="):
                expr = self.parse_expr()
            elif self.at(":"):
                if lbl.kind is not LabelKind.OBJECT:
                    raise ParseError("nested shape shorthand needs an object label",
                                     (lbl_start, self.prev_end()))
                self.advance()
                subject = s.Path(s.Var(s.IMPLICIT), lbl, span=(lbl_start, self.prev_end()))
                nested = self.parse_shape_entries()
                expr = s.Shape(subject, nested, span=(lbl_start, self.prev_end()))
            else:
                expr = s.Path(s.Var(s.IMPLICIT), lbl, span=(lbl_start, self.prev_end()))
            entries.append((lbl, expr))
            if not self.accept(","):
                break
        self.implicit_depth -= 1
        self.expect("}", "'}' closing shape opened at %d" % open_tok.span[0])
        return entries

    def parse_assign_entries(self, what: str) -> list[tuple[Label, s.SurfaceExpr]]:
        """`{ l := e, ... }`: explicit assignments only (insert/update shapes)."""
        self.expect("{")
        entries: list[tuple[Label, s.SurfaceExpr]] = []
        seen: set[Label] = set()
        while not self.at("}"):
            lbl_start = self.peek().span[0]
            lbl = self.parse_label()
            if lbl in seen:
                raise ParseError(f"duplicate {what} label {lbl}", (lbl_start, self.prev_end()))
            seen.add(lbl)
            self.expect(":=", f"':=' ({what} entries take explicit values)")
            entries.append((lbl, self.parse_expr()))
            if not self.accept(","):
                break
        self.expect("}")
        return entries

    def parse_primary(self) -> s.SurfaceExpr:
        tok = self.peek()
        start = tok.span[0]
        if tok.kind == "int":
            self.advance()
            try:
                return s.ScalarLit(IntVal(int(tok.text)), span=tok.span)
            except ValueError as exc:
                raise ParseError(str(exc), tok.span) from None
        if tok.kind == "-":
            self.advance()
            num = self.expect("int", "integer literal")
            try:
                return s.ScalarLit(IntVal(-int(num.text)), span=(start, num.span[1]))
            except ValueError as exc:
                raise ParseError(str(exc), (start, num.span[1])) from None
        if tok.kind == "str":
            self.advance()
            return s.ScalarLit(StrVal(tok.text), span=tok.span)
        if tok.kind == "kw:true":
            self.advance()
            return s.ScalarLit(BoolVal(True), span=tok.span)
        if tok.kind == "kw:false":
            self.advance()
            return s.ScalarLit(BoolVal(False), span=tok.span)
        if tok.kind == "(":
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        if tok.kind == "{":
            return self.parse_set_literal()
        if tok.kind == "<":
            self.advance()
            target = self.expect("ident", "type name inside cast").text
            self.expect(">")
            self.expect("{", "'{}' (the empty set)")
            self.expect("}", "'}' (casts apply to empty braces only)")
            return s.EmptyCast(target, span=(start, self.prev_end()))
        if tok.kind == ".":
            if self.implicit_depth == 0:
                raise ParseError("no implicit subject in scope for leading '.'", tok.span)
            self.advance()
            lbl = self.parse_label()
            return s.Path(s.Var(s.IMPLICIT), lbl, span=(start, self.prev_end()))
        if tok.kind == "kw:select":
            self.advance()
            return s.Select(self.parse_expr(), span=(start, self.prev_end()))
        if tok.kind == "kw:with":
            return self.parse_with()
        if tok.kind == "kw:for":
            return self.parse_for()
        if tok.kind == "kw:if":
            return self.parse_if()
        if tok.kind == "kw:insert":
            self.advance()
            tname = self.expect("ident", "type name").text
            entries = self.parse_assign_entries("insert")
            return s.Insert(tname, entries, span=(start, self.prev_end()))
        if tok.kind == "kw:update":
            self.advance()
            subject = self.parse_chain()
            self.expect("kw:set", "'set'")
            self.implicit_depth += 1
            entries = self.parse_assign_entries("update")
            self.implicit_depth -= 1
            return s.Update(subject, entries, span=(start, self.prev_end()))
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                call_args: list[s.SurfaceExpr] = []
                if not self.at(")"):
                    call_args.append(self.parse_expr())
                    while self.accept(","):
                        call_args.append(self.parse_expr())
                self.expect(")")
                return s.Call(tok.text, call_args, span=(start, self.prev_end()))
            if tok.text in self.scopes:
                return s.Var(tok.text, span=tok.span)
            return s.TypeRef(tok.text, span=tok.span)
        raise ParseError(f"unexpected {tok.kind} {tok.text!r}", tok.span, expected="an expression")

    def parse_set_literal(self) -> s.SurfaceExpr:
        open_tok = self.expect("{")
        start = open_tok.span[0]
        if self.at("}"):
            raise ParseError(
                "empty set literal needs a type cast, e.g. <int>{}", open_tok.span
            )
        items = [self.parse_expr()]
        while self.accept(","):
            items.append(self.parse_expr())
        self.expect("}")
        return s.SetLit(items, span=(start, self.prev_end()))

    def parse_with(self) -> s.SurfaceExpr:
        start = self.expect("kw:with").span[0]
        bindings: list[tuple[str, s.SurfaceExpr]] = []
        while True:
            name = self.expect("ident", "binder name").text
            self.expect(":=", "':='")
            bindings.append((name, self.parse_chain()))
            self.scopes.append(name)  # visible to later bindings and the body
            if not self.accept(","):
                break
        self.expect("kw:select", "'select' after with-bindings")
        body = self.parse_expr()
        for _ in bindings:
            self.scopes.pop()
        e = body
        for name, bound in reversed(bindings):
            e = s.With(name, bound, e, span=(start, self.prev_end()))
        return e

    def parse_for(self) -> s.SurfaceExpr:
        start = self.expect("kw:for").span[0]
        name = self.expect("ident", "binder name").text
        self.expect("kw:in", "'in'")
        source = self.parse_chain()
        self.expect("kw:union", "'union' separating the loop body")
        self.scopes.append(name)
        body = self.parse_expr()
        self.scopes.pop()
        return s.For(name, source, body, span=(start, self.prev_end()))

    def parse_if(self) -> s.SurfaceExpr:
        start = self.expect("kw:if").span[0]
        cond = self.parse_chain()
        self.expect("kw:then", "'then'")
        then_branch = self.parse_chain()
        self.expect("kw:else", "'else'")
        else_branch = self.parse_expr()
        return s.If(cond, then_branch, else_branch, span=(start, self.prev_end()))

    # -- schemas ---------------------------------------------------------

    def parse_schema(self) -> list[s.SurfaceSchemaDecl]:
        decls = []
        while not self.at("eof"):
            decls.append(self.parse_type_decl())
        return decls

    def parse_type_decl(self) -> s.SurfaceSchemaDecl:
        self.expect("kw:type", "'type'")
        name = self.expect("ident", "type name").text
        self.expect("{")
        members: list[s.SchemaMember] = []
        while not self.at("}"):
            members.append(self.parse_member())
        self.expect("}")
        self.accept(";")
        return s.SurfaceSchemaDecl(name, members)

    def _parse_flags(self) -> tuple[bool, bool]:
        required = bool(self.accept("kw:required"))
        multi = bool(self.accept("kw:multi"))
        return required, multi

    def parse_member(self) -> s.SchemaMember:
        required, multi = self._parse_flags()
        name_tok = self.expect("ident", "label")
        self.expect(":", "':'")
        target_tok = self.expect("ident", "scalar type or type name")
        link_props: list[s.SchemaLinkProp] = []
        target: ScalarType | str
        if target_tok.text in SCALAR_NAMES:
            target = SCALAR_NAMES[target_tok.text]
        else:
            target = target_tok.text
            if self.at("{"):
                self.advance()
                while not self.at("}"):
                    link_props.append(self.parse_link_prop())
                self.expect("}")
        self.expect(";", "';'")
        return s.SchemaMember(olabel(name_tok.text), required, multi, target, link_props)

    def parse_link_prop(self) -> s.SchemaLinkProp:
        required, multi = self._parse_flags()
        self.accept("@")
        name = self.expect("ident", "link property name").text
        self.expect(":", "':'")
        ty_tok = self.expect("ident", "scalar type")
        if ty_tok.text not in SCALAR_NAMES:
            raise ParseError("link properties must have scalar types", ty_tok.span)
        self.expect(";", "';'")
        return s.SchemaLinkProp(llabel(name), SCALAR_NAMES[ty_tok.text],
                                s.mode_from_flags(required, multi))


def parse_query(text: str) -> s.SurfaceExpr:
    """Parse a single expression; trailing input is rejected."""
    return _Parser(text).parse_query()


def parse_schema(text: str) -> list[s.SurfaceSchemaDecl]:
    """Parse schema source into declarations, in source order."""
    return _Parser(text).parse_schema()


def schema_to_source(schema: Schema) -> str:
    """Render a schema back to source text (parse_schema round-trips it).
    The empty mode has no concrete syntax and cannot be rendered."""
    from .model import AT_LEAST_ONE, MANY, ONE, Cardinality

    def flags(card: Cardinality) -> str:
        if card == ONE:
            return "required "
        if card == AT_LEAST_ONE:
            return "required multi "
        if card == MANY:
            return "multi "
        if card.hi == 0:
            raise ValueError("the empty mode has no schema syntax")
        return ""

    lines = []
    for tname, decl in schema.types.items():
        lines.append(f"type {tname} {{")
        for lbl, (ty, card) in decl.labels.items():
            if isinstance(ty, StoredRefType):
                if ty.link_props:
                    props = " ".join(
                        f"{flags(pc)}{plbl.bare}: {pt};" for plbl, (pt, pc) in ty.link_props
                    )
                    lines.append(f"  {flags(card)}{lbl}: {ty.target} {{ {props} }};")
                else:
                    lines.append(f"  {flags(card)}{lbl}: {ty.target};")
            else:
                lines.append(f"  {flags(card)}{lbl}: {ty};")
        lines.append("};")
    return "\n".join(lines) + "\n"


def build_schema(decls: list[s.SurfaceSchemaDecl]) -> tuple[Schema, list[Diagnostic]]:
    """Assemble a Schema from surface declarations, reporting duplicate names.
    Well-formedness beyond duplicates is check_schema's job."""
    diags: list[Diagnostic] = []
    schema = Schema()
    for decl in decls:
        if decl.name in schema.types:
            diags.append(Diagnostic("DuplicateTypeName", decl.name, "type declared more than once"))
            continue
        labels: dict[Label, tuple] = {}
        for member in decl.members:
            if member.label in labels:
                diags.append(
                    Diagnostic("DuplicateLabel", f"{decl.name}.{member.label}", "label declared more than once")
                )
                continue
            if isinstance(member.target, ScalarType):
                ty = member.target
            else:
                props = []
                seen = set()
                for lp in member.link_props:
                    if lp.label in seen:
                        diags.append(
                            Diagnostic(
                                "DuplicateLabel",
                                f"{decl.name}.{member.label}.{lp.label}",
                                "link property declared more than once",
                            )
                        )
                        continue
                    seen.add(lp.label)
                    props.append((lp.label, (lp.scalar, lp.card)))
                ty = StoredRefType(member.target, tuple(props))
            labels[member.label] = (ty, member.card)
        schema.types[decl.name] = ObjectTypeDecl(labels)
    return schema, diags
