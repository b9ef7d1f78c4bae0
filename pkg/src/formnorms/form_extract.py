"""Form discovery, label association, and field featurization.

Besides real ``<form>`` elements (visible or not), pages carry loose field
elements that function as forms; those are clustered by ancestor proximity
into synthetic forms. Every input/select/textarea on a page lands in exactly
one real or synthetic form.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field

from .htmldom import Document, Element, TextNode, normalize_text
from .page_provider import PageSnapshot

FIELD_TAGS = frozenset({"input", "select", "textarea"})
RETAINED_ATTRS = ("name", "placeholder", "type", "id")
FEATURE_ATTR_ORDER = ("placeholder", "name", "id", "type")
LABEL_TEXT_CAP = 80
DEFAULT_PROXIMITY = 3

LABEL_FOR_ATTR = "for_attr"
LABEL_WRAPPING = "wrapping"
LABEL_PRECEDING = "preceding_text"
LABEL_NONE = "none"


@dataclass
class RawField:
    tag: str
    attributes: dict[str, str]
    label_text: str | None = None
    label_source: str = LABEL_NONE

    def to_json(self) -> dict:
        return {"tag": self.tag, "attributes": dict(sorted(self.attributes.items())),
                "label_text": self.label_text, "label_source": self.label_source}

    @classmethod
    def from_json(cls, obj: dict) -> "RawField":
        return cls(obj["tag"], dict(obj["attributes"]),
                   obj.get("label_text"), obj.get("label_source", LABEL_NONE))


@dataclass
class RawForm:
    form_id: str
    html: str
    page_url: str
    page_title: str
    fields: list[RawField] = dc_field(default_factory=list)
    synthetic: bool = False

    def to_json(self) -> dict:
        return {"form_id": self.form_id, "html": self.html,
                "page_url": self.page_url, "page_title": self.page_title,
                "synthetic": self.synthetic,
                "fields": [f.to_json() for f in self.fields]}

    @classmethod
    def from_json(cls, obj: dict) -> "RawForm":
        return cls(obj["form_id"], obj["html"], obj["page_url"],
                   obj.get("page_title", ""), [RawField.from_json(f) for f in obj["fields"]],
                   obj.get("synthetic", False))


def _form_id(page_url: str, locator: str, synthetic: bool) -> str:
    marker = "s" if synthetic else "f"
    digest = hashlib.sha1(f"{page_url}\x00{marker}\x00{locator}".encode()).hexdigest()
    return digest[:16]


def retained_attributes(el: Element) -> dict[str, str]:
    kept = {}
    for key, value in el.attrs.items():
        if key in RETAINED_ATTRS or key.startswith("aria-"):
            kept[key] = value
    return kept


def associate_label(field_el: Element, boundary: Element,
                    doc: Document) -> tuple[str | None, str]:
    """Label for a field: for= match, then wrapping label, then preceding text."""
    field_id = field_el.attrs.get("id")
    if field_id:
        for label in doc.find_all("label"):
            if label.attrs.get("for") == field_id:
                text = label.text()
                if text:
                    return text, LABEL_FOR_ATTR
    for ancestor in field_el.ancestors():
        if ancestor.tag == "label":
            text = ancestor.text()
            if text:
                return text, LABEL_WRAPPING
        if ancestor is boundary:
            break
    text = _preceding_text(field_el, boundary)
    if text:
        return text, LABEL_PRECEDING
    return None, LABEL_NONE


def _preceding_text(field_el: Element, boundary: Element) -> str | None:
    """Nearest visible text before the field, searched inside the boundary."""
    nodes = list(boundary.iter_nodes())
    try:
        stop = next(i for i, n in enumerate(nodes) if n is field_el)
    except StopIteration:
        return None
    for node in reversed(nodes[:stop]):
        if not isinstance(node, TextNode):
            continue
        parent = node.parent
        if parent is not None and parent.tag in ("script", "style", "template",
                                                 "noscript"):
            continue
        text = normalize_text(node.text)
        if text:
            return text[-LABEL_TEXT_CAP:]
    return None


def _build_field(field_el: Element, boundary: Element, doc: Document) -> RawField:
    label_text, source = associate_label(field_el, boundary, doc)
    return RawField(field_el.tag, retained_attributes(field_el), label_text, source)


def extract_forms(snapshot: PageSnapshot) -> list[RawForm]:
    """One RawForm per <form> element, including invisible ones."""
    doc = snapshot.document()
    forms = []
    for form_el in doc.find_all("form"):
        fields = [_build_field(el, form_el, doc)
                  for el in form_el.iter_elements() if el.tag in FIELD_TAGS]
        forms.append(RawForm(
            form_id=_form_id(snapshot.final_url, form_el.locator(), False),
            html=form_el.outer_html(), page_url=snapshot.final_url,
            page_title=snapshot.title, fields=fields, synthetic=False))
    return forms


def _orphan_fields(doc: Document) -> list[Element]:
    orphans = []
    for el in doc.iter_elements():
        if el.tag in FIELD_TAGS and not any(a.tag == "form" for a in el.ancestors()):
            orphans.append(el)
    return orphans


def _ancestor_chain(el: Element) -> list[Element]:
    return [el, *el.ancestors()]


def group_orphan_fields(snapshot: PageSnapshot,
                        proximity: int = DEFAULT_PROXIMITY) -> list[RawForm]:
    """Cluster loose fields into synthetic forms.

    Two orphan fields belong together when they share an ancestor at most
    ``proximity`` steps above each of them (equivalently: their nearest
    common ancestor is within ``proximity`` of both). Grouping is the
    transitive closure of that relation.
    """
    doc = snapshot.document()
    orphans = _orphan_fields(doc)
    if not orphans:
        return []

    # union-find keyed by near ancestors: fields sharing any ancestor within
    # `proximity` steps end up in one component
    parent_idx = list(range(len(orphans)))

    def find(i: int) -> int:
        while parent_idx[i] != i:
            parent_idx[i] = parent_idx[parent_idx[i]]
            i = parent_idx[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent_idx[max(ri, rj)] = min(ri, rj)

    owner_by_ancestor: dict[int, int] = {}
    for idx, field_el in enumerate(orphans):
        node: Element | None = field_el
        for _ in range(proximity):
            node = node.parent
            if node is None:
                break
            key = id(node)
            if key in owner_by_ancestor:
                union(owner_by_ancestor[key], idx)
            else:
                owner_by_ancestor[key] = idx

    clusters: dict[int, list[Element]] = {}
    for idx, field_el in enumerate(orphans):
        clusters.setdefault(find(idx), []).append(field_el)

    forms = []
    for root in sorted(clusters):  # orphan list is already in document order
        members = clusters[root]
        lca = _lowest_common_ancestor(members)
        # a singleton cluster's LCA is the field itself; labels then search
        # the enclosing container
        label_boundary = lca if lca is not members[0] or len(members) > 1 \
            else (lca.parent or lca)
        fields = [_build_field(el, label_boundary, doc) for el in members]
        forms.append(RawForm(
            form_id=_form_id(snapshot.final_url, lca.locator(), True),
            html=lca.outer_html(), page_url=snapshot.final_url,
            page_title=snapshot.title, fields=fields, synthetic=True))
    return forms


def _lowest_common_ancestor(elements: list[Element]) -> Element:
    if len(elements) == 1:
        return elements[0]
    common: list[Element] | None = None
    for el in elements:
        chain = list(reversed(_ancestor_chain(el)))  # root .. el
        if common is None:
            common = chain
        else:
            keep = 0
            for a, b in zip(common, chain):
                if a is b:
                    keep += 1
                else:
                    break
            common = common[:keep]
    assert common, "elements share at least the document root"
    return common[-1]


def snapshot_forms(snapshot: PageSnapshot,
                   proximity: int = DEFAULT_PROXIMITY) -> list[RawForm]:
    """All forms on a page: real ones first, then synthetic orphan groups."""
    return extract_forms(snapshot) + group_orphan_fields(snapshot, proximity)


def featurize_field(field: RawField) -> str:
    """The classifier input block for one field; layout is frozen.

    Attribute order is fixed (placeholder, name, id, type, then aria-*
    alphabetically) so downstream inputs and golden files are deterministic
    regardless of attribute order in the source markup.
    """
    lines = [f"tagName: {field.tag.upper()}"]
    if field.label_text:
        lines.append(f"label: {field.label_text}")
    lines.append("attributes:")
    for key in FEATURE_ATTR_ORDER:
        if key in field.attributes:
            lines.append(f"- {key}: {field.attributes[key]}")
    for key in sorted(k for k in field.attributes if k.startswith("aria-")):
        lines.append(f"- {key}: {field.attributes[key]}")
    return "\n".join(lines)
