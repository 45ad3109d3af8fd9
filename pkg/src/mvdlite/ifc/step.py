"""Low-level ISO 10303-21 (SPF) lexing: attribute values, string escapes, serialization."""
from __future__ import annotations

import re
from typing import NamedTuple

from ..errors import StepSyntaxError


class _Marker:
    __slots__ = ("text",)

    def __init__(self, text):
        self.text = text

    def __repr__(self):
        return self.text

    def __reduce__(self):
        return (_marker, (self.text,))


def _marker(text):
    return {"$": UNSET, "*": DERIVED, ".U.": UNKNOWN}[text]


UNSET = _Marker("$")
DERIVED = _Marker("*")
UNKNOWN = _Marker(".U.")  # the third LOGICAL value


class EnumToken(str):
    """An enumeration value, stored without the surrounding dots."""

    __slots__ = ()

    def __repr__(self):
        return f".{str(self)}."


class Binary(str):
    __slots__ = ()


class Ref(int):
    """Reference to another instance (``#N``)."""

    __slots__ = ()

    def __repr__(self):
        return f"#{int(self)}"


class Typed(NamedTuple):
    """A value wrapped in a defined type, e.g. ``IFCBOOLEAN(.T.)``."""

    type_name: str
    value: object


# -- strings ------------------------------------------------------------------

_ESCAPE = re.compile(r"\\X2\\((?:[0-9A-Fa-f]{4})*)\\X0\\|\\X4\\((?:[0-9A-Fa-f]{8})*)\\X0\\"
                     r"|\\X\\([0-9A-Fa-f]{2})|\\S\\(.)|\\P[A-I]\\|\\\\|''", re.S)


def _unescape(m):
    if m.group(1) is not None:
        hexs = m.group(1)
        raw = bytes.fromhex(hexs)
        return raw.decode("utf-16-be", errors="surrogatepass")
    if m.group(2) is not None:
        hexs = m.group(2)
        return "".join(chr(int(hexs[i:i + 8], 16)) for i in range(0, len(hexs), 8))
    if m.group(3) is not None:
        return chr(int(m.group(3), 16))
    if m.group(4) is not None:
        return chr(ord(m.group(4)) + 128)
    tok = m.group(0)
    if tok == "\\\\":
        return "\\"
    if tok == "''":
        return "'"
    return ""  # code page switch


def decode_string(raw: str) -> str:
    """Decode the body of a STEP string literal (without the quotes)."""
    if "\\" not in raw and "'" not in raw:
        return raw
    return _ESCAPE.sub(_unescape, raw)


def encode_string(text: str) -> str:
    out = []
    for ch in text:
        o = ord(ch)
        if ch == "'":
            out.append("''")
        elif ch == "\\":
            out.append("\\\\")
        elif 32 <= o < 127:
            out.append(ch)
        else:
            if o > 0xFFFF:
                out.append("\\X4\\%08X\\X0\\" % o)
            else:
                out.append("\\X2\\%04X\\X0\\" % o)
    return "'" + "".join(out) + "'"


# -- attribute lists ------------------------------------------------------------

_TOKEN = re.compile(r"""[ \t\r\n]*(?:
  (?P<str>'(?:[^']|'')*')
 |\#(?P<ref>\d+)
 |\.(?P<enum>[A-Za-z_][A-Za-z0-9_]*)\.
 |(?P<num>[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
 |(?P<typed>[A-Za-z_][A-Za-z0-9_]*)[ \t\r\n]*\(
 |(?P<open>\()
 |(?P<close>\))
 |(?P<comma>,)
 |(?P<unset>\$)
 |(?P<derived>\*)
 |"(?P<bin>[0-9A-Fa-f]*)"
 |/\*[\s\S]*?\*/
)""", re.X)


def _atom(m):
    kind = m.lastgroup
    if kind == "str":
        return decode_string(m.group("str")[1:-1])
    if kind == "ref":
        return Ref(int(m.group("ref")))
    if kind == "num":
        t = m.group("num")
        if "." in t or "e" in t or "E" in t:
            return float(t)
        return int(t)
    if kind == "enum":
        tok = m.group("enum").upper()
        if tok == "T":
            return True
        if tok == "F":
            return False
        if tok == "U":
            return UNKNOWN
        return EnumToken(tok)
    if kind == "unset":
        return UNSET
    if kind == "derived":
        return DERIVED
    if kind == "bin":
        return Binary(m.group("bin"))
    return None


def parse_args(text: str, pos: int, source: str | None = None):
    """Parse a parenthesized attribute list whose ``(`` has already been consumed.

    Returns ``(values, end)`` where ``end`` is the offset just after the closing ``)``.
    """
    stack = [[]]
    wrappers = [None]
    expect_value = True
    match = _TOKEN.match
    while True:
        m = match(text, pos)
        if m is None:
            raise syntax_error(text, pos, "unexpected character in attribute list", source)
        pos = m.end()
        kind = m.lastgroup
        if kind is None:
            continue  # comment
        if kind == "close":
            items = stack.pop()
            wrapper = wrappers.pop()
            if not stack:
                return items, pos
            if wrapper is not None:
                if len(items) != 1:
                    raise syntax_error(text, pos, f"typed value {wrapper} takes one argument", source)
                stack[-1].append(Typed(wrapper, items[0]))
            else:
                stack[-1].append(tuple(items))
            expect_value = False
        elif kind == "comma":
            if expect_value:
                raise syntax_error(text, pos - 1, "missing value before ','", source)
            expect_value = True
        elif kind in ("open", "typed"):
            stack.append([])
            wrappers.append(m.group("typed").upper() if kind == "typed" else None)
            expect_value = True
        else:
            stack[-1].append(_atom(m))
            expect_value = False


def syntax_error(text: str, pos: int, message: str, source=None) -> StepSyntaxError:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return StepSyntaxError(message, line, col, pos, source)


def iter_refs(value):
    """Yield every referenced id inside a value, in order."""
    if isinstance(value, Ref):
        yield int(value)
    elif isinstance(value, tuple):
        if isinstance(value, Typed):
            yield from iter_refs(value.value)
        else:
            for v in value:
                yield from iter_refs(v)


# -- serialization ----------------------------------------------------------------

def format_real(x: float) -> str:
    s = repr(float(x)).upper()
    if s in ("INF", "-INF", "NAN"):
        raise ValueError("non-finite real cannot be written to SPF")
    mant, _, exp = s.partition("E")
    if "." not in mant:
        mant += "."
    elif mant.endswith(".0"):
        mant = mant[:-1]
    return mant + ("E" + exp if exp else "")


def format_value(value, renumber=None) -> str:
    if value is UNSET:
        return "$"
    if value is DERIVED:
        return "*"
    if value is UNKNOWN:
        return ".U."
    if value is True:
        return ".T."
    if value is False:
        return ".F."
    if isinstance(value, Ref):
        return f"#{renumber[int(value)] if renumber is not None else int(value)}"
    if isinstance(value, EnumToken):
        return f".{value}."
    if isinstance(value, Binary):
        return f'"{value}"'
    if isinstance(value, str):
        return encode_string(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    if isinstance(value, Typed):
        return f"{value.type_name.upper()}({format_value(value.value, renumber)})"
    if isinstance(value, tuple):
        return "(" + ",".join(format_value(v, renumber) for v in value) + ")"
    raise TypeError(f"cannot serialize {value!r}")
