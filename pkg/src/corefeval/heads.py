"""Dependency-tree head selection for mentions.

A mention head is either read from the annotation (the numeric head-word
index among the opening fields) or predicted as the "highest" node of the
span: among the treelet roots (nodes whose parent falls outside the
mention) the one with minimal depth, preferring surface words over empty
nodes and then the earliest document position.  Empty nodes hang off their
first enhanced parent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .model import Mention, Node

log = logging.getLogger("corefeval")

PROVIDED = "provided"
HIGHEST_NODE = "highest_node"


@dataclass(frozen=True)
class HeadChoice:
    head: Node
    candidates: tuple[Node, ...]
    rule_used: str


def effective_parent(node: Node) -> Node | None:
    if node.is_empty:
        return node.enhanced_parents[0] if node.enhanced_parents else None
    return node.parent


def treelet_roots(mention: Mention) -> list[Node]:
    """Nodes whose parent lies outside the mention (or is absent)."""
    inside = mention.position_set
    return [
        n for n in mention.nodes
        if (p := effective_parent(n)) is None or p.index not in inside
    ]


def find_head(mention: Mention) -> HeadChoice:
    provided = mention.provided_head_index
    if provided is not None:
        if 1 <= provided <= len(mention.nodes):
            head = mention.nodes[provided - 1]
            if log.isEnabledFor(logging.DEBUG):
                computed = _highest_node(mention).head
                if computed is not head:
                    log.debug("annotated head %s differs from computed %s in %r",
                              head.id, computed.id, mention)
            return HeadChoice(head, (), PROVIDED)
        log.warning("head index %d out of range in %r; computing instead",
                    provided, mention)
    return _highest_node(mention)


def _highest_node(mention: Mention) -> HeadChoice:
    candidates = treelet_roots(mention)
    if not candidates:
        log.warning("no treelet root in %r (cyclic dependencies); "
                    "falling back to the first node", mention)
        return HeadChoice(mention.nodes[0], (mention.nodes[0],), HIGHEST_NODE)
    depths = _depths(candidates)
    if depths is None:
        log.warning("dependency cycle under %r; falling back to the first "
                    "candidate", mention)
        head = min(candidates, key=lambda n: n.index)
    else:
        head = min(candidates, key=lambda n: (depths[n.index], n.is_empty, n.index))
    return HeadChoice(head, tuple(candidates), HIGHEST_NODE)


def _depths(candidates: list[Node]) -> dict[int, int] | None:
    depths: dict[int, int] = {}
    for node in candidates:
        chain: list[Node] = []
        on_chain: set[int] = set()
        cur: Node | None = node
        while cur is not None and cur.index not in depths:
            if cur.index in on_chain:
                return None  # cycle
            chain.append(cur)
            on_chain.add(cur.index)
            cur = effective_parent(cur)
        depth = -1 if cur is None else depths[cur.index]
        for step in reversed(chain):
            depth += 1
            depths[step.index] = depth
    return {n.index: depths[n.index] for n in candidates}


def mention_head(mention: Mention) -> Node:
    """The mention's head node, cached on the mention."""
    head = mention._head
    if head is None:
        head = find_head(mention).head
        mention._head = head
    return head


def head_upos_set(mention: Mention) -> set[str]:
    """UPOS of the head plus of its `flat` children inside the mention."""
    head = mention_head(mention)
    tags = {head.upos}
    for node in mention.nodes:
        if node.parent is head and node.deprel.startswith("flat"):
            tags.add(node.upos)
    return tags
