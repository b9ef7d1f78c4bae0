"""Forgiving HTML tree built on the stdlib parser.

Pages in the wild are routinely malformed; parsing here is best-effort and
never raises. The tree keeps parent links and per-parent element indices so
that nodes can be addressed by stable locators of (tag, sibling-index) pairs,
which survive re-parsing of identical markup.
"""
from __future__ import annotations

import logging
from html import escape
from html.parser import HTMLParser

log = logging.getLogger(__name__)

VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
})

# Starting <key> implicitly closes an open <value> (a pragmatic subset of the
# HTML5 implied-end-tag rules).
_CLOSES_PREVIOUS = {
    "p": {"p"},
    "li": {"li"},
    "option": {"option"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
    "tr": {"tr", "td", "th"},
    "td": {"td", "th"},
    "th": {"td", "th"},
}

_INVISIBLE_TEXT_PARENTS = frozenset({"script", "style", "template", "noscript"})


class TextNode:
    __slots__ = ("parent", "text")

    def __init__(self, parent: "Element | None", text: str):
        self.parent = parent
        self.text = text


class Element:
    __slots__ = ("tag", "attrs", "children", "parent", "elem_index")

    def __init__(self, tag: str, attrs: dict[str, str],
                 parent: "Element | None", elem_index: int):
        self.tag = tag
        self.attrs = attrs
        self.children: list[Element | TextNode] = []
        self.parent = parent
        # index among the parent's *element* children; stable under re-parse
        self.elem_index = elem_index

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<Element {self.tag}[{self.elem_index}]>"

    def element_children(self) -> list["Element"]:
        return [c for c in self.children if isinstance(c, Element)]

    def iter_elements(self):
        """Yield descendant elements in document order, self excluded."""
        stack = [c for c in reversed(self.children) if isinstance(c, Element)]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(c for c in reversed(node.children) if isinstance(c, Element))

    def iter_nodes(self):
        """Yield all descendant nodes (elements and text) in document order."""
        stack = list(reversed(self.children))
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Element):
                stack.extend(reversed(node.children))

    def find_all(self, *tags: str) -> list["Element"]:
        wanted = set(tags)
        return [el for el in self.iter_elements() if el.tag in wanted]

    def ancestors(self):
        node = self.parent
        while node is not None:
            yield node
            node = node.parent

    def has_ancestor(self, candidate: "Element") -> bool:
        return any(a is candidate for a in self.ancestors())

    def text(self) -> str:
        """Whitespace-normalized visible text of the subtree."""
        parts: list[str] = []
        _collect_text(self, parts)
        return " ".join("".join(parts).split())

    def locator(self) -> str:
        """Root-to-node path of tag[elem_index] steps, '/'-separated."""
        steps = []
        node: Element | None = self
        while node is not None and node.parent is not None:
            steps.append(f"{node.tag}[{node.elem_index}]")
            node = node.parent
        return "/".join(reversed(steps))

    def outer_html(self) -> str:
        out: list[str] = []
        _serialize(self, out)
        return "".join(out)


def _collect_text(el: Element, parts: list[str]) -> None:
    if el.tag in _INVISIBLE_TEXT_PARENTS:
        return
    for child in el.children:
        if isinstance(child, TextNode):
            parts.append(child.text)
        else:
            _collect_text(child, parts)
            parts.append(" ")


def _serialize(node: Element | TextNode, out: list[str]) -> None:
    if isinstance(node, TextNode):
        if node.parent is not None and node.parent.tag in _INVISIBLE_TEXT_PARENTS:
            out.append(node.text)  # raw script/style payload
        else:
            out.append(escape(node.text, quote=False))
        return
    out.append(f"<{node.tag}")
    for key, value in node.attrs.items():
        out.append(f' {key}="{escape(value, quote=True)}"')
    out.append(">")
    if node.tag in VOID_ELEMENTS:
        return
    for child in node.children:
        _serialize(child, out)
    out.append(f"</{node.tag}>")


class Document:
    """A parsed page. ``root`` is a synthetic container above the top level."""

    def __init__(self, root: Element):
        self.root = root

    def iter_elements(self):
        return self.root.iter_elements()

    def iter_nodes(self):
        return self.root.iter_nodes()

    def find_all(self, *tags: str) -> list[Element]:
        return self.root.find_all(*tags)

    def resolve(self, locator: str) -> Element | None:
        """Find the element addressed by a locator(); None if stale."""
        node = self.root
        if not locator:
            return None
        for step in locator.split("/"):
            tag, _, idx = step.partition("[")
            try:
                index = int(idx.rstrip("]"))
            except ValueError:
                return None
            kids = node.element_children()
            if index >= len(kids) or kids[index].tag != tag:
                return None
            node = kids[index]
        return node

    def html_element(self) -> Element | None:
        for child in self.root.element_children():
            if child.tag == "html":
                return child
        return None

    def lang_attr(self) -> str | None:
        html = self.html_element()
        if html is not None:
            return html.attrs.get("lang")
        return None

    def title(self) -> str:
        for el in self.iter_elements():
            if el.tag == "title":
                return el.text()
        return ""

    def visible_text(self) -> str:
        return self.root.text()

    def document_positions(self) -> dict[int, int]:
        """Map id(node) -> document-order position, for order comparisons."""
        return {id(node): i for i, node in enumerate(self.iter_nodes())}


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("#document", {}, None, 0)
        self.stack = [self.root]

    def _append_element(self, tag: str, attrs) -> Element:
        parent = self.stack[-1]
        attr_map: dict[str, str] = {}
        for name, value in attrs:
            if name not in attr_map:  # first occurrence wins
                attr_map[name] = value if value is not None else ""
        el = Element(tag, attr_map, parent, len(parent.element_children()))
        parent.children.append(el)
        return el

    def handle_starttag(self, tag, attrs):
        while (len(self.stack) > 1
               and self.stack[-1].tag in _CLOSES_PREVIOUS.get(tag, ())):
            self.stack.pop()
        el = self._append_element(tag, attrs)
        if tag not in VOID_ELEMENTS:
            self.stack.append(el)

    def handle_startendtag(self, tag, attrs):
        self._append_element(tag, attrs)

    def handle_endtag(self, tag):
        if tag in VOID_ELEMENTS:
            return
        open_tags = [el.tag for el in self.stack[1:]]
        if tag not in open_tags:
            return  # stray end tag
        while len(self.stack) > 1:
            popped = self.stack.pop()
            if popped.tag == tag:
                break

    def handle_data(self, data):
        if not data:
            return
        parent = self.stack[-1]
        parent.children.append(TextNode(parent, data))


def parse_html(html: str) -> Document:
    """Best-effort parse; never raises on malformed input."""
    builder = _TreeBuilder()
    try:
        builder.feed(html)
        builder.close()
    except Exception as exc:  # extremely rare with convert_charrefs
        log.warning("html parse aborted, returning partial tree: %s", exc)
    return Document(builder.root)


def normalize_text(text: str) -> str:
    return " ".join(text.split())
