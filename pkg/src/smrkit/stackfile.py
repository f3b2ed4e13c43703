"""Reader and writer for the stack-definition text format.

The format is line based. ``#`` starts a comment. Sections::

    [materials]
    SiO2   density=2198.58 velocity=5640 q=50
    ScAlN  density=3570 velocity=8500 q=50 e33=2.6 eps33=1.24e-10

    [stack]
    top = free                  # or: top = loaded <material>
    layer Pt 40nm
    layer ScAlN 67.6nm piezo
    layer Pt 40nm
    layer SiO2 28.2nm
    repeat 8
      layer Ta2O5 24.3nm
      layer SiO2 28.2nm
    end
    substrate = Si

    [geometry]
    length = 8.5um              # or: area = 72.25um2
    width = 8.5um

Layers are listed top to bottom. ``repeat N ... end`` expands its body N
times and cannot be nested. Material lines take ``key=value`` pairs with
keys ``density``, ``velocity``, ``q``, ``e33``, ``eps33``; the values are
SI. Lengths, areas and frequencies elsewhere accept unit suffixes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from smrkit.core import Layer, Material, Stack, validate_stack
from smrkit.exceptions import InputError, StackFileError
from smrkit.units import parse_quantity

_TOKEN_RE = re.compile(r"[^\s=]+|=")
_SECTION_RE = re.compile(r"^\s*\[\s*([A-Za-z_]+)\s*\]\s*$")

MATERIAL_KEYS = {"density": "density", "velocity": "velocity", "q": "q_mech", "e33": "e33", "eps33": "eps33"}
GEOMETRY_KEYS = ("area", "length", "width", "gap")


@dataclass
class Token:
    text: str
    line: int
    column: int


@dataclass
class Statement:
    tokens: list[Token]

    @property
    def line(self) -> int:
        return self.tokens[0].line

    def error(self, message: str, token: Token | None = None) -> StackFileError:
        tok = token or self.tokens[0]
        return StackFileError(message, tok.line, tok.column)


@dataclass
class Document:
    sections: dict[str, list[Statement]] = field(default_factory=dict)
    section_lines: dict[str, int] = field(default_factory=dict)


def tokenize(text: str) -> Document:
    """Split a document into sections of tokenized statements."""
    doc = Document()
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1).lower()
            if current in doc.sections:
                raise StackFileError(f"duplicate section [{current}]", lineno, line.index("[") + 1)
            doc.sections[current] = []
            doc.section_lines[current] = lineno
            continue
        if line.lstrip().startswith("["):
            raise StackFileError("malformed section header", lineno, line.index("[") + 1)
        tokens = [Token(t.group(0), lineno, t.start() + 1) for t in _TOKEN_RE.finditer(line)]
        if current is None:
            raise StackFileError("content before the first [section]", lineno, tokens[0].column)
        doc.sections[current].append(Statement(tokens))
    return doc


def _number(stmt: Statement, tok: Token) -> float:
    try:
        value = float(tok.text)
    except ValueError:
        raise stmt.error(f"expected a number, got {tok.text!r}", tok) from None
    if math.isnan(value):
        raise stmt.error("NaN is not a valid value", tok)
    return value


def _quantity(stmt: Statement, tok: Token, dimension: str) -> float:
    try:
        return parse_quantity(tok.text, dimension)
    except ValueError as exc:
        raise stmt.error(str(exc), tok) from None


def _assignment(stmt: Statement) -> tuple[Token, list[Token]]:
    toks = stmt.tokens
    if len(toks) < 3 or toks[1].text != "=":
        raise stmt.error("expected 'key = value'")
    return toks[0], toks[2:]


def _parse_materials(statements: list[Statement]) -> dict[str, Material]:
    materials: dict[str, Material] = {}
    for stmt in statements:
        name_tok, rest = stmt.tokens[0], stmt.tokens[1:]
        if name_tok.text in materials:
            raise stmt.error(f"material {name_tok.text!r} defined twice", name_tok)
        if len(rest) % 3:
            raise stmt.error("material properties must be written as key=value")
        kwargs: dict[str, float] = {}
        for i in range(0, len(rest), 3):
            key, eq, val = rest[i : i + 3]
            if eq.text != "=":
                raise stmt.error("expected '='", eq)
            if key.text not in MATERIAL_KEYS:
                raise stmt.error(f"unknown material property {key.text!r}", key)
            field_name = MATERIAL_KEYS[key.text]
            if field_name in kwargs:
                raise stmt.error(f"property {key.text!r} given twice", key)
            kwargs[field_name] = _number(stmt, val)
        for required in ("density", "velocity"):
            if required not in kwargs:
                raise stmt.error(f"material {name_tok.text!r} is missing {required}", name_tok)
        try:
            materials[name_tok.text] = Material(name=name_tok.text, **kwargs)
        except InputError as exc:
            raise stmt.error(str(exc), name_tok) from None
    return materials


def parse_materials_file(text: str) -> dict[str, Material]:
    """Read a file holding only a ``[materials]`` section."""
    doc = tokenize(text)
    for name in doc.sections:
        if name != "materials":
            raise StackFileError(f"unexpected section [{name}] in a materials file", doc.section_lines[name], 1)
    return _parse_materials(doc.sections.get("materials", []))


def _lookup(stmt: Statement, tok: Token, materials: dict[str, Material]) -> Material:
    try:
        return materials[tok.text]
    except KeyError:
        raise stmt.error(f"unknown material {tok.text!r}", tok) from None


def _parse_layer(stmt: Statement, materials: dict[str, Material]) -> tuple[Layer, bool]:
    toks = stmt.tokens
    if len(toks) not in (3, 4):
        raise stmt.error("expected 'layer <material> <thickness> [piezo]'")
    mat = _lookup(stmt, toks[1], materials)
    thickness = _quantity(stmt, toks[2], "length")
    if not thickness > 0:
        raise stmt.error(f"thickness must be positive, got {toks[2].text!r}", toks[2])
    piezo = False
    if len(toks) == 4:
        if toks[3].text != "piezo":
            raise stmt.error(f"unknown layer flag {toks[3].text!r}", toks[3])
        piezo = True
    return Layer(mat, thickness), piezo


def build_stack(doc: Document, materials: dict[str, Material]) -> Stack:
    """Assemble a Stack from the ``[stack]`` and ``[geometry]`` sections."""
    if "stack" not in doc.sections:
        raise StackFileError("missing [stack] section", 1, 1)
    layers: list[Layer] = []
    layer_lines: list[int] = []
    piezo_at: list[tuple[int, Statement]] = []
    top: Material | None = None
    top_seen = False
    substrate: Material | None = None
    repeat: tuple[int, Statement] | None = None
    body: list[tuple[Layer, bool, Statement]] = []

    def add(layer, piezo, stmt):
        if piezo:
            piezo_at.append((len(layers), stmt))
        layers.append(layer)
        layer_lines.append(stmt.line)

    for stmt in doc.sections["stack"]:
        head = stmt.tokens[0]
        kw = head.text
        if kw == "layer":
            layer, piezo = _parse_layer(stmt, materials)
            if repeat is not None:
                body.append((layer, piezo, stmt))
            else:
                add(layer, piezo, stmt)
        elif kw == "repeat":
            if repeat is not None:
                raise stmt.error("nested repeat blocks are not supported")
            if len(stmt.tokens) != 2:
                raise stmt.error("expected 'repeat <count>'")
            try:
                count = int(stmt.tokens[1].text)
            except ValueError:
                raise stmt.error("repeat count must be an integer", stmt.tokens[1]) from None
            if count < 1:
                raise stmt.error("repeat count must be >= 1", stmt.tokens[1])
            repeat, body = (count, stmt), []
        elif kw == "end":
            if repeat is None:
                raise stmt.error("'end' without 'repeat'")
            if not body:
                raise stmt.error("empty repeat block")
            for _ in range(repeat[0]):
                for layer, piezo, s in body:
                    add(layer, piezo, s)
            repeat = None
        elif kw in ("top", "substrate"):
            if repeat is not None:
                raise stmt.error(f"'{kw}' inside a repeat block")
            key, value = _assignment(stmt)
            if kw == "top":
                if top_seen:
                    raise stmt.error("top boundary given twice")
                top_seen = True
                if len(value) == 1 and value[0].text == "free":
                    top = None
                elif len(value) == 2 and value[0].text == "loaded":
                    top = _lookup(stmt, value[1], materials)
                else:
                    raise stmt.error("expected 'top = free' or 'top = loaded <material>'", value[0])
            else:
                if substrate is not None:
                    raise stmt.error("substrate given twice")
                if len(value) != 1:
                    raise stmt.error("expected 'substrate = <material>'", value[0])
                substrate = _lookup(stmt, value[0], materials)
        else:
            raise stmt.error(f"unknown stack statement {kw!r}", head)
    if repeat is not None:
        raise repeat[1].error("repeat block is not closed with 'end'")

    section_line = doc.section_lines["stack"]
    if not layers:
        raise StackFileError("stack has no layers", section_line, 1)
    if substrate is None:
        raise StackFileError("missing 'substrate = <material>'", section_line, 1)
    if not piezo_at:
        raise StackFileError("no layer is marked 'piezo'", section_line, 1)
    if len(piezo_at) > 1:
        stmt = piezo_at[1][1]
        raise stmt.error(f"duplicate piezo designation (first at line {piezo_at[0][1].line})", stmt.tokens[-1])

    area = _parse_geometry(doc)
    stack = Stack(tuple(layers), piezo_at[0][0], area, substrate, top)
    report = validate_stack(stack)
    if report.errors:
        issue = report.errors[0]
        line = layer_lines[issue.layer] if issue.layer is not None else doc.section_lines.get("geometry", section_line)
        raise StackFileError(issue.message, line, 1)
    return stack


def _parse_geometry(doc: Document) -> float:
    if "geometry" not in doc.sections:
        raise StackFileError("missing [geometry] section", None)
    values: dict[str, float] = {}
    for stmt in doc.sections["geometry"]:
        key, value = _assignment(stmt)
        if key.text not in GEOMETRY_KEYS:
            raise stmt.error(f"unknown geometry key {key.text!r}", key)
        if key.text in values:
            raise stmt.error(f"{key.text!r} given twice", key)
        if len(value) != 1:
            raise stmt.error("expected a single value", value[0])
        dim = "area" if key.text == "area" else "length"
        values[key.text] = _quantity(stmt, value[0], dim)
        if not values[key.text] > 0:
            raise stmt.error(f"{key.text} must be positive", value[0])
    # gap is layout information only; it does not enter the 1D model
    line = doc.section_lines["geometry"]
    if "area" in values:
        if "length" in values or "width" in values:
            raise StackFileError("give either area or length and width, not both", line, 1)
        return values["area"]
    if "length" in values and "width" in values:
        return values["length"] * values["width"]
    raise StackFileError("geometry needs area, or length and width", line, 1)


KNOWN_SECTIONS = ("materials", "stack", "geometry")


def parse_document(text: str, library: dict[str, Material] | None = None, extra_sections=()) -> tuple[Stack, Document]:
    doc = tokenize(text)
    for name, line in doc.section_lines.items():
        if name not in KNOWN_SECTIONS and name not in extra_sections:
            raise StackFileError(f"unknown section [{name}]", line, 1)
    materials = dict(library or {})
    # file-local definitions shadow the library
    materials.update(_parse_materials(doc.sections.get("materials", [])))
    return build_stack(doc, materials), doc


def parse_stack_file(text: str, library: dict[str, Material] | None = None) -> Stack:
    """Parse a stack-definition document.

    ``library`` supplies materials not defined in the file's own
    ``[materials]`` section. Raises StackFileError with line and column.
    """
    stack, _ = parse_document(text, library)
    return stack


def _fmt(x: float) -> str:
    return repr(float(x))


def format_material(m: Material) -> str:
    parts = [m.name, f"density={_fmt(m.density)}", f"velocity={_fmt(m.velocity)}"]
    if not math.isinf(m.q_mech):
        parts.append(f"q={_fmt(m.q_mech)}")
    if m.e33 is not None:
        parts += [f"e33={_fmt(m.e33)}", f"eps33={_fmt(m.eps33)}"]
    return " ".join(parts)


def _layer_line(la: Layer, piezo: bool = False, indent: str = "") -> str:
    return f"{indent}layer {la.material.name} {_fmt(la.thickness)}" + (" piezo" if piezo else "")


def format_layers(layers, piezo_index: int | None = None) -> list[str]:
    """Layer statements, folding repeated two-layer patterns into ``repeat`` blocks."""
    out: list[str] = []
    i = 0
    n = len(layers)
    while i < n:
        count = 0
        j = i
        while j + 1 < n and layers[j : j + 2] == layers[i : i + 2] and layers[i] != layers[i + 1]:
            if piezo_index is not None and j <= piezo_index <= j + 1:
                break
            count += 1
            j += 2
        if count >= 2:
            out.append(f"repeat {count}")
            out.append(_layer_line(layers[i], indent="  "))
            out.append(_layer_line(layers[i + 1], indent="  "))
            out.append("end")
            i += 2 * count
        else:
            out.append(_layer_line(layers[i], piezo=(i == piezo_index)))
            i += 1
    return out


def serialize_stack(s: Stack) -> str:
    """Write a self-contained stack document; ``parse_stack_file`` inverts it exactly."""
    lines = ["[materials]"]
    lines += [format_material(m) for m in s.materials().values()]
    lines += ["", "[stack]"]
    lines.append("top = free" if s.top_load is None else f"top = loaded {s.top_load.name}")
    lines += format_layers(s.layers, s.piezo_index)
    lines.append(f"substrate = {s.substrate.name}")
    lines += ["", "[geometry]", f"area = {_fmt(s.area)}", ""]
    return "\n".join(lines)
