"""Instance files: the textual declaration format consumed by the CLI.

An instance file is UTF-8, line oriented, with ``[kind name]`` section
headers and ``key = value`` entries; ``#`` starts a comment.  Sections:

  [decomposition]        free = b1 b2
  [factor NAME]          kind = cyclic|free|table, plus kind fields
  [factoraut NAME]       factor = F, generator images, ``inverse`` images
  [automorphism NAME]    free images, ``factor F = target : conj : twist``,
                         and the same block prefixed ``inverse``
  [graph NAME]           vertices, basepoint, ``edge E = src dst length``,
                         tree, ``marking E = word``
  [graphmap NAME]        graph = G, edge images in path syntax,
                         ``factor F = target : conj-path : twist``,
                         optional ``mate = AUT`` (checked)
  [ray NAME]             map = M, radius, power_cap
  [params]               default depths and caps for the CLI

Parsing reports line numbers; validation failures name the violated
invariant.  Every declared automorphism must verify against its declared
inverse, and every graph map with a ``mate`` must induce it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .autos import FactorAction, FpAutomorphism
from .errors import ParseError, ValidationError
from .factors import (CyclicFactor, FactorAutomorphism, FreeFactor,
                      TableFactor)
from .graphs import EMPTY_PATH, FactorMapAction, GraphMap, MarkedGraph
from .words import EMPTY_WORD, FreeProduct


@dataclass
class Section:
    kind: str
    name: str
    line: int
    entries: list = field(default_factory=list)  # (line, key, value)

    def get(self, key, default=None):
        for _, k, v in self.entries:
            if k == key:
                return v
        return default

    def require(self, key):
        v = self.get(key)
        if v is None:
            raise ParseError(f"section [{self.kind} {self.name}] missing '{key}'",
                             line=self.line)
        return v

    def items_prefixed(self, prefix):
        out = []
        for ln, k, v in self.entries:
            if k.startswith(prefix + " "):
                out.append((ln, k[len(prefix) + 1:], v))
        return out

    def plain_items(self, reserved):
        out = []
        for ln, k, v in self.entries:
            if k in reserved or " " in k:
                continue
            out.append((ln, k, v))
        return out


@dataclass
class RaySpec:
    map_name: str
    radius: float
    power_cap: int


@dataclass
class Instance:
    group: FreeProduct
    factor_auts: dict
    automorphisms: dict
    graphs: dict
    maps: dict
    rays: dict
    params: dict
    source: str = ""

    def automorphism(self, name):
        if name not in self.automorphisms:
            raise ValidationError(f"unknown automorphism {name!r}")
        return self.automorphisms[name]

    def graph_map(self, name):
        if name not in self.maps:
            raise ValidationError(f"unknown graph map {name!r}")
        return self.maps[name]


def _tokenize_sections(text: str):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.lstrip().startswith("["):
            body = line.strip()
            if not body.endswith("]"):
                raise ParseError("unterminated section header", line=lineno)
            parts = body[1:-1].split()
            if len(parts) == 1:
                kind, name = parts[0], ""
            elif len(parts) == 2:
                kind, name = parts
            else:
                raise ParseError("section header needs 'kind' or 'kind name'",
                                 line=lineno)
            current = Section(kind, name, lineno)
            sections.append(current)
            continue
        if current is None:
            raise ParseError("entry before any section", line=lineno)
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, _, value = line.partition("=")
        current.entries.append((lineno, key.strip(), value.strip()))
    return sections


def _parse_length(text: str, lineno: int) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad length {text!r}", line=lineno) from None


def _build_factor(sec: Section, fid: int):
    kind = sec.require("kind")
    if kind == "cyclic":
        modulus = int(sec.require("modulus"))
        gens = sec.require("generators").split()
        if len(gens) != 1:
            raise ParseError("cyclic factor takes one generator name", line=sec.line)
        return CyclicFactor(fid, sec.name, modulus, gens[0])
    if kind == "free":
        rank = int(sec.require("rank"))
        gens = sec.require("generators").split()
        return FreeFactor(fid, sec.name, rank, gens)
    if kind == "table":
        names = sec.require("elements").split()
        rows = {}
        for ln, en, value in sec.items_prefixed("row"):
            try:
                rows[names.index(en)] = [names.index(t) for t in value.split()]
            except ValueError:
                raise ParseError(f"unknown element in row {en}", line=ln) from None
        table = []
        for i in range(len(names)):
            if i not in rows:
                raise ParseError(f"missing row for element {names[i]}", line=sec.line)
            table.append(rows[i])
        gens_value = sec.get("generators")
        gens = gens_value.split() if gens_value else None
        return TableFactor(fid, sec.name, names, table, gens)
    raise ParseError(f"unknown factor kind {kind!r}", line=sec.line)


def _split_triple(value: str, lineno: int):
    parts = [p.strip() for p in value.split(":")]
    if len(parts) != 3:
        raise ParseError("expected 'target : conjugator : twist'", line=lineno)
    return parts


def parse_instance(text: str, source: str = "<string>") -> Instance:
    sections = _tokenize_sections(text)

    decomp = [s for s in sections if s.kind == "decomposition"]
    if len(decomp) != 1:
        raise ParseError("exactly one [decomposition] section required",
                         line=sections[0].line if sections else 1)
    free_names = decomp[0].require("free").split()

    factor_secs = [s for s in sections if s.kind == "factor"]
    factors = [
        _build_factor(sec, fid) for fid, sec in enumerate(factor_secs, start=1)]
    factor_id = {sec.name: fid for fid, sec in enumerate(factor_secs, start=1)}
    group = FreeProduct(factors, free_names)

    def lookup_factor(name, lineno):
        if name not in factor_id:
            raise ParseError(f"unknown factor {name!r}", line=lineno)
        return group.factor(factor_id[name])

    factor_auts = {}
    for sec in (s for s in sections if s.kind == "factoraut"):
        src = lookup_factor(sec.require("factor"), sec.line)
        tgt_name = sec.get("target", sec.require("factor"))
        tgt = lookup_factor(tgt_name, sec.line)
        images, inv_images = {}, {}
        for ln, key, value in sec.entries:
            if key in ("factor", "target"):
                continue
            if key.startswith("inverse "):
                gen = key[len("inverse "):]
                inv_images[gen] = (ln, value)
            else:
                images[key] = (ln, value)

        def image_tuple(grp, mapping):
            out = []
            for gname in grp.generator_names:
                if gname not in mapping:
                    raise ParseError(
                        f"factoraut {sec.name}: missing image of {gname}",
                        line=sec.line)
                ln, value = mapping[gname]
                tgt_grp = tgt if mapping is images else src
                out.append(tgt_grp.parse_payload(value))
            return tuple(out)

        aut = FactorAutomorphism(src, tgt, image_tuple(src, images),
                                 image_tuple(tgt, inv_images), name=sec.name)
        factor_auts[sec.name] = aut

    def lookup_factoraut(name, lineno):
        base, inverted = name, False
        if name.endswith("^-1"):
            base, inverted = name[:-3], True
        if base not in factor_auts:
            raise ParseError(f"unknown factoraut {base!r}", line=lineno)
        aut = factor_auts[base]
        return aut.inverse() if inverted else aut

    automorphisms = {}
    for sec in (s for s in sections if s.kind == "automorphism"):
        def free_images(prefix=""):
            out = []
            for gname in free_names:
                key = (prefix + gname).strip()
                value = sec.get(key)
                if value is None:
                    raise ParseError(
                        f"automorphism {sec.name}: missing image of {key!r}",
                        line=sec.line)
                out.append(group.parse_word(value))
            return tuple(out)

        def factor_actions(prefix):
            actions = {}
            for ln, fname, value in sec.items_prefixed((prefix + "factor").strip()):
                tgt_name, conj_text, twist_name = _split_triple(value, ln)
                fid = factor_id.get(fname)
                if fid is None:
                    raise ParseError(f"unknown factor {fname!r}", line=ln)
                tgt_fid = factor_id.get(tgt_name)
                if tgt_fid is None:
                    raise ParseError(f"unknown factor {tgt_name!r}", line=ln)
                twist = lookup_factoraut(twist_name, ln)
                actions[fid] = FactorAction(
                    tgt_fid, group.parse_word(conj_text), twist)
            missing = {f.id for f in factors} - set(actions)
            if missing:
                raise ParseError(
                    f"automorphism {sec.name}: missing factor actions "
                    f"{sorted(missing)}", line=sec.line)
            return actions

        aut = FpAutomorphism(
            group, free_images(), factor_actions(""),
            inverse_data=(free_images("inverse "), factor_actions("inverse ")),
            name=sec.name)
        ok, witness = aut.verify()
        if not ok:
            raise ValidationError(
                f"automorphism {sec.name} does not verify: {witness}")
        automorphisms[sec.name] = aut

    graphs = {}
    for sec in (s for s in sections if s.kind == "graph"):
        vertices = {}
        for tok in sec.require("vertices").split():
            if ":" in tok:
                vname, _, fname = tok.partition(":")
                vertices[vname] = factor_id.get(fname)
                if vertices[vname] is None:
                    raise ParseError(f"unknown factor {fname!r}", line=sec.line)
            else:
                vertices[tok] = None
        edges = {}
        for ln, en, value in sec.items_prefixed("edge"):
            parts = value.split()
            if len(parts) != 3:
                raise ParseError("edge needs 'src dst length'", line=ln)
            edges[en] = (parts[0], parts[1], _parse_length(parts[2], ln))
        tree = set(sec.get("tree", "").split())
        marking = {}
        for ln, en, value in sec.items_prefixed("marking"):
            marking[en] = group.parse_word(value)
        graphs[sec.name] = MarkedGraph(group, vertices, edges, tree, marking,
                                       sec.require("basepoint"), name=sec.name)

    maps = {}
    for sec in (s for s in sections if s.kind == "graphmap"):
        gname = sec.require("graph")
        if gname not in graphs:
            raise ParseError(f"unknown graph {gname!r}", line=sec.line)
        graph = graphs[gname]
        images = {}
        for ln, key, value in sec.plain_items(
                reserved={"graph", "mate"}):
            if key in graph.edges:
                images[key] = graph.parse_path(value)
        actions = {}
        for ln, fname, value in sec.items_prefixed("factor"):
            tgt_name, conj_text, twist_name = _split_triple(value, ln)
            fid = factor_id.get(fname)
            tgt_fid = factor_id.get(tgt_name)
            if fid is None or tgt_fid is None:
                raise ParseError("unknown factor in graphmap action", line=ln)
            conj = graph.parse_path(conj_text) if conj_text != "()" else EMPTY_PATH
            actions[fid] = FactorMapAction(tgt_fid, conj,
                                           lookup_factoraut(twist_name, ln))
        gm = GraphMap(graph, images, None, actions, name=sec.name)
        mate = sec.get("mate")
        if mate is not None:
            if mate not in automorphisms:
                raise ParseError(f"unknown mate automorphism {mate!r}",
                                 line=sec.line)
            if not gm.mated_check(automorphisms[mate]):
                raise ValidationError(
                    f"graphmap {sec.name} does not induce its mate {mate}")
        maps[sec.name] = gm

    rays = {}
    for sec in (s for s in sections if s.kind == "ray"):
        map_name = sec.require("map")
        if map_name not in maps:
            raise ParseError(f"unknown graph map {map_name!r}", line=sec.line)
        rays[sec.name] = RaySpec(
            map_name,
            float(Fraction(sec.get("radius", "2"))),
            int(sec.get("power_cap", "4")),
        )

    params = {}
    for sec in (s for s in sections if s.kind == "params"):
        for ln, k, v in sec.entries:
            params[k] = v

    known = {"decomposition", "factor", "factoraut", "automorphism", "graph",
             "graphmap", "ray", "params"}
    for sec in sections:
        if sec.kind not in known:
            raise ParseError(f"unknown section kind {sec.kind!r}", line=sec.line)

    return Instance(group, factor_auts, automorphisms, graphs, maps, rays,
                    params, source=source)


def load_instance(path) -> Instance:
    from pathlib import Path
    p = Path(path)
    if not p.exists():
        bundled = Path(__file__).parent / "instances" / f"{path}.fp"
        if bundled.exists():
            p = bundled
        else:
            raise ParseError(f"no such instance file: {path}")
    return parse_instance(p.read_text(encoding="utf-8"), source=str(p))
