"""MiniSvc: a small annotated curly-brace language for service code.

Grammar::

    file          := (classDecl | interfaceDecl)* ;
    annotation    := '@' Ident ( '(' StringLit ')' )? ;
    classDecl     := annotation* 'class' Ident ('implements' Ident)? '{' member* '}' ;
    interfaceDecl := 'interface' Ident '{' methodSig* '}' ;
    methodSig     := Ident Ident '(' paramList? ')' ';' ;
    member        := fieldDecl | methodDecl ;
    fieldDecl     := annotation* Ident Ident ';' ;
    methodDecl    := annotation* Ident Ident '(' paramList? ')' '{' stmt* '}' ;
    paramList     := Ident Ident (',' Ident Ident)* ;
    stmt          := localDecl | call | construction ;
    localDecl     := Ident Ident ';' ;
    call          := Ident '.' Ident '(' argList? ')' ';' ;
    argList       := Ident (',' Ident)* ;
    construction  := 'new' Ident '(' ')' ';' ;

Only the constructs the purpose extraction consumes are supported. Parsing
stops at the first error.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Union

from .errors import LexError, ParseError


class TokenKind(enum.Enum):
    IDENT = "Ident"
    AT = "At"
    LBRACE = "LBrace"
    RBRACE = "RBrace"
    LPAREN = "LParen"
    RPAREN = "RParen"
    SEMI = "Semi"
    COMMA = "Comma"
    DOT = "Dot"
    STRING = "StringLit"
    KW_CLASS = "KwClass"
    KW_INTERFACE = "KwInterface"
    KW_IMPLEMENTS = "KwImplements"
    KW_NEW = "KwNew"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    col: int

    def describe(self) -> str:
        if self.kind is TokenKind.STRING:
            return f"string {_quote(self.text)}"
        return repr(self.text)


_KEYWORDS = {
    "class": TokenKind.KW_CLASS,
    "interface": TokenKind.KW_INTERFACE,
    "implements": TokenKind.KW_IMPLEMENTS,
    "new": TokenKind.KW_NEW,
}
_PUNCT = {
    "@": TokenKind.AT,
    "{": TokenKind.LBRACE,
    "}": TokenKind.RBRACE,
    "(": TokenKind.LPAREN,
    ")": TokenKind.RPAREN,
    ";": TokenKind.SEMI,
    ",": TokenKind.COMMA,
    ".": TokenKind.DOT,
}
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}
_LEXEME = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\["\\nt])*")
  | (?P<punct>[@{}();,.])
    """,
    re.VERBOSE,
)
_UNESCAPE = re.compile(r"\\(.)")


def tokenize(text: str, path: str = "<input>") -> list[Token]:
    """Split MiniSvc source into tokens, skipping whitespace and ``//`` comments."""
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _LEXEME.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise LexError(line, col, text[pos], path)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "ident":
            tokens.append(Token(_KEYWORDS.get(lexeme, TokenKind.IDENT), lexeme, line, col))
        elif kind == "string":
            value = _UNESCAPE.sub(lambda e: _ESCAPES[e.group(1)], lexeme[1:-1])
            tokens.append(Token(TokenKind.STRING, value, line, col))
        elif kind == "punct":
            tokens.append(Token(_PUNCT[lexeme], lexeme, line, col))
        else:
            newlines = lexeme.count("\n")
            if newlines:
                line += newlines
                line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    return tokens


def end_position(text: str) -> tuple[int, int]:
    """(line, col) just past the last character of ``text``."""
    line = text.count("\n") + 1
    return line, len(text) - (text.rfind("\n") + 1) + 1


# --------------------------------------------------------------------------
# syntax tree
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Annotation:
    name: str
    arg: str | None = None
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Param:
    type: str
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class LocalDecl:
    type: str
    name: str
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class Call:
    receiver: str
    method: str
    args: tuple[str, ...] = ()
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class New:
    class_name: str
    line: int = 0
    col: int = 0


Stmt = Union[LocalDecl, Call, New]


@dataclass(frozen=True)
class FieldDecl:
    type: str
    name: str
    annotations: tuple[Annotation, ...] = ()
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class MethodDecl:
    return_type: str
    name: str
    annotations: tuple[Annotation, ...] = ()
    params: tuple[Param, ...] = ()
    body: tuple[Stmt, ...] = ()
    line: int = 0
    col: int = 0

    def annotation(self, name: str) -> Annotation | None:
        return _find(self.annotations, name)


@dataclass(frozen=True)
class MethodSig:
    return_type: str
    name: str
    params: tuple[Param, ...] = ()
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class ClassDecl:
    name: str
    annotations: tuple[Annotation, ...] = ()
    implements: str | None = None
    fields: tuple[FieldDecl, ...] = ()
    methods: tuple[MethodDecl, ...] = ()
    line: int = 0
    col: int = 0

    def annotation(self, name: str) -> Annotation | None:
        return _find(self.annotations, name)


@dataclass(frozen=True)
class InterfaceDecl:
    name: str
    signatures: tuple[MethodSig, ...] = ()
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class CompilationUnit:
    path: str = "<input>"
    classes: tuple[ClassDecl, ...] = ()
    interfaces: tuple[InterfaceDecl, ...] = ()


def _find(annotations: tuple[Annotation, ...], name: str) -> Annotation | None:
    for a in annotations:
        if a.name == name:
            return a
    return None


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], path: str, end: tuple[int, int]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.path = path
        self.end = end

    def peek(self, offset: int = 0) -> Token | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def fail(self, expected: str) -> ParseError:
        tok = self.peek()
        if tok is None:
            return ParseError(expected, "end of input", self.end[0], self.end[1], self.path)
        return ParseError(expected, tok.describe(), tok.line, tok.col, self.path)

    def at(self, kind: TokenKind) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind is kind

    def expect(self, kind: TokenKind, what: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind is not kind:
            raise self.fail(what)
        self.pos += 1
        return tok

    def ident(self, what: str = "identifier") -> Token:
        return self.expect(TokenKind.IDENT, what)

    def parse_file(self) -> CompilationUnit:
        classes, interfaces = [], []
        while self.peek() is not None:
            if self.at(TokenKind.KW_INTERFACE):
                interfaces.append(self.interface_decl())
            else:
                annotations = self.annotations()
                if not self.at(TokenKind.KW_CLASS):
                    raise self.fail("'class'" if annotations else "'class' or 'interface'")
                classes.append(self.class_decl(annotations))
        return CompilationUnit(self.path, tuple(classes), tuple(interfaces))

    def annotations(self) -> tuple[Annotation, ...]:
        found = []
        while self.at(TokenKind.AT):
            at = self.expect(TokenKind.AT, "'@'")
            name = self.ident("annotation name").text
            arg = None
            if self.at(TokenKind.LPAREN):
                self.pos += 1
                arg = self.expect(TokenKind.STRING, "string literal").text
                self.expect(TokenKind.RPAREN, "')'")
            found.append(Annotation(name, arg, at.line, at.col))
        return tuple(found)

    def class_decl(self, annotations: tuple[Annotation, ...]) -> ClassDecl:
        kw = self.expect(TokenKind.KW_CLASS, "'class'")
        line, col = (annotations[0].line, annotations[0].col) if annotations else (kw.line, kw.col)
        name = self.ident("class name").text
        implements = None
        if self.at(TokenKind.KW_IMPLEMENTS):
            self.pos += 1
            implements = self.ident("interface name").text
        self.expect(TokenKind.LBRACE, "'{'")
        fields, methods = [], []
        while not self.at(TokenKind.RBRACE):
            if self.peek() is None:
                raise self.fail("member or '}'")
            member = self.member()
            (fields if isinstance(member, FieldDecl) else methods).append(member)
        self.pos += 1
        return ClassDecl(name, annotations, implements, tuple(fields), tuple(methods), line, col)

    def member(self) -> FieldDecl | MethodDecl:
        annotations = self.annotations()
        type_tok = self.ident("member type" if not annotations else "member type after annotations")
        line, col = (annotations[0].line, annotations[0].col) if annotations else (type_tok.line, type_tok.col)
        name = self.ident("member name").text
        if self.at(TokenKind.SEMI):
            self.pos += 1
            return FieldDecl(type_tok.text, name, annotations, line, col)
        if not self.at(TokenKind.LPAREN):
            raise self.fail("';' or '('")
        params = self.params()
        self.expect(TokenKind.LBRACE, "'{'")
        body = []
        while not self.at(TokenKind.RBRACE):
            body.append(self.stmt())
        self.pos += 1
        return MethodDecl(type_tok.text, name, annotations, params, tuple(body), line, col)

    def params(self) -> tuple[Param, ...]:
        self.expect(TokenKind.LPAREN, "'('")
        params = []
        if self.at(TokenKind.RPAREN):
            self.pos += 1
            return ()
        while True:
            type_tok = self.ident("parameter or ')'" if not params else "parameter type")
            name = self.ident("parameter name").text
            params.append(Param(type_tok.text, name, type_tok.line, type_tok.col))
            if self.at(TokenKind.COMMA):
                self.pos += 1
                continue
            self.expect(TokenKind.RPAREN, "',' or ')'")
            return tuple(params)

    def stmt(self) -> Stmt:
        tok = self.peek()
        if tok is not None and tok.kind is TokenKind.KW_NEW:
            self.pos += 1
            cls = self.ident("class name").text
            self.expect(TokenKind.LPAREN, "'('")
            self.expect(TokenKind.RPAREN, "')'")
            self.expect(TokenKind.SEMI, "';'")
            return New(cls, tok.line, tok.col)
        first = self.ident("statement or '}'")
        if self.at(TokenKind.IDENT):
            name = self.ident().text
            self.expect(TokenKind.SEMI, "';'")
            return LocalDecl(first.text, name, first.line, first.col)
        if not self.at(TokenKind.DOT):
            raise self.fail("identifier or '.'")
        self.pos += 1
        method = self.ident("method name").text
        self.expect(TokenKind.LPAREN, "'('")
        args = []
        if not self.at(TokenKind.RPAREN):
            args.append(self.ident("argument or ')'").text)
            while self.at(TokenKind.COMMA):
                self.pos += 1
                args.append(self.ident("argument").text)
        self.expect(TokenKind.RPAREN, "',' or ')'")
        self.expect(TokenKind.SEMI, "';'")
        return Call(first.text, method, tuple(args), first.line, first.col)

    def interface_decl(self) -> InterfaceDecl:
        kw = self.expect(TokenKind.KW_INTERFACE, "'interface'")
        name = self.ident("interface name").text
        self.expect(TokenKind.LBRACE, "'{'")
        sigs = []
        while not self.at(TokenKind.RBRACE):
            ret = self.ident("method signature or '}'")
            mname = self.ident("method name").text
            params = self.params()
            self.expect(TokenKind.SEMI, "';'")
            sigs.append(MethodSig(ret.text, mname, params, ret.line, ret.col))
        self.pos += 1
        return InterfaceDecl(name, tuple(sigs), kw.line, kw.col)


def parse(tokens: list[Token], path: str = "<input>", end: tuple[int, int] | None = None) -> CompilationUnit:
    """Recursive-descent parse of a token list.

    ``end`` is the end-of-input position used for errors at EOF; it defaults
    to just past the last token.
    """
    if end is None:
        if tokens:
            last = tokens[-1]
            width = len(_quote(last.text)) if last.kind is TokenKind.STRING else len(last.text)
            end = (last.line, last.col + width)
        else:
            end = (1, 1)
    return _Parser(tokens, path, end).parse_file()


def parse_source(source: str | bytes, path: str = "<input>") -> CompilationUnit:
    """Tokenize and parse; bytes are decoded as UTF-8 with positioned errors."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            prefix = source[: exc.start].decode("utf-8")
            line, col = end_position(prefix)
            raise LexError(line, col, repr(source[exc.start : exc.start + 1])[1:], path) from None
    return parse(tokenize(source, path), path, end_position(source))


# --------------------------------------------------------------------------
# pretty printer
# --------------------------------------------------------------------------


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _fmt_annotation(a: Annotation) -> str:
    return f"@{a.name}" if a.arg is None else f"@{a.name}({_quote(a.arg)})"


def _fmt_params(params: tuple[Param, ...]) -> str:
    return ", ".join(f"{p.type} {p.name}" for p in params)


def _fmt_stmt(s: Stmt) -> str:
    if isinstance(s, LocalDecl):
        return f"{s.type} {s.name};"
    if isinstance(s, New):
        return f"new {s.class_name}();"
    return f"{s.receiver}.{s.method}({', '.join(s.args)});"


def format_unit(unit: CompilationUnit, indent: str = "    ") -> str:
    """Canonical source text for a compilation unit."""
    blocks = []
    for cls in unit.classes:
        lines = [_fmt_annotation(a) for a in cls.annotations]
        head = f"class {cls.name}"
        if cls.implements:
            head += f" implements {cls.implements}"
        lines.append(head + " {")
        members: list[list[str]] = []
        if cls.fields:
            members.append(
                [indent + " ".join([*map(_fmt_annotation, f.annotations), f.type, f.name]) + ";" for f in cls.fields]
            )
        for m in cls.methods:
            chunk = [indent + _fmt_annotation(a) for a in m.annotations]
            chunk.append(f"{indent}{m.return_type} {m.name}({_fmt_params(m.params)}) {{")
            chunk.extend(indent * 2 + _fmt_stmt(s) for s in m.body)
            chunk.append(indent + "}")
            members.append(chunk)
        for i, chunk in enumerate(members):
            if i:
                lines.append("")
            lines.extend(chunk)
        lines.append("}")
        blocks.append("\n".join(lines))
    for iface in unit.interfaces:
        lines = [f"interface {iface.name} {{"]
        lines.extend(f"{indent}{s.return_type} {s.name}({_fmt_params(s.params)});" for s in iface.signatures)
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
