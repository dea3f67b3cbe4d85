"""Deterministic command line front end.

Commands take an instance file first, then their arguments; output is
line oriented with stable ordering, reals rendered with twelve decimal
places, and a final OK or FAIL line.  Exit codes: 0 all checks passed,
1 a check failed, 2 parse error, 3 validation or precondition failure.

Finite-depth verdict asymmetry is stated in the reports themselves:
divergence verdicts are proofs, fixedness verdicts are evidence.
"""

from __future__ import annotations

import argparse
import random
import sys

from .autos import classify_fixed_point, fixes_boundary_point, inner
from .errors import FpError, ParseError, PreconditionError, ValidationError
from .graphs import MarkedGraph
from .instance import Instance, load_instance
from .lamination import (check_generation_property, generate_language,
                         quasi_periodicity_constant, stabilizes_language)
from .rays import (AttractiveRay, build_ray, find_base_vertex,
                   max_singular_length, stab_check)
from .words import Ray

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3


def fmt_real(x: float) -> str:
    return f"{x:.12f}"


class Report:
    def __init__(self, out):
        self._out = out
        self.records = []
        self.ok = True

    def add(self, key: str, value):
        if isinstance(value, bool):
            value = "yes" if value else "no"
        elif isinstance(value, float):
            value = fmt_real(value)
        self.records.append((key, str(value)))
        print(f"{key}: {value}", file=self._out)

    def fail(self):
        self.ok = False

    def finish(self, dump_path=None) -> int:
        print("OK" if self.ok else "FAIL", file=self._out)
        if dump_path:
            with open(dump_path, "w", encoding="utf-8") as fh:
                for key, value in sorted(self.records):
                    fh.write(f"{key} = {value}\n")
                fh.write(f"status = {'OK' if self.ok else 'FAIL'}\n")
        return EXIT_OK if self.ok else EXIT_CHECK_FAILED


def resolve_automorphism(inst: Instance, spec: str):
    """name, name^k (k may be negative), or inner:<word>."""
    if spec.startswith("inner:"):
        word = inst.group.parse_word(spec[len("inner:"):])
        return inner(inst.group, word)
    if "^" in spec:
        name, _, exp = spec.rpartition("^")
        try:
            k = int(exp)
        except ValueError:
            raise ValidationError(f"bad automorphism power in {spec!r}") from None
        return inst.automorphism(name).power(k)
    return inst.automorphism(spec)


def resolve_ray(inst: Instance, spec: str):
    """A named [ray] section or rational:<word>.

    Returns (ray, attractive_ray_or_None)."""
    if spec.startswith("rational:"):
        word = inst.group.parse_word(spec[len("rational:"):])
        return inst.group.rational_ray(word), None
    if spec not in inst.rays:
        raise ValidationError(f"unknown ray {spec!r}")
    rs = inst.rays[spec]
    gm = inst.graph_map(rs.map_name)
    base = find_base_vertex(gm, rs.radius, rs.power_cap)
    ray = AttractiveRay(gm, base)
    return ray.ray, ray


# -- commands ----------------------------------------------------------------

def cmd_reduce(inst, args, report):
    w = inst.group.parse_word(args.word)
    report.add("word", inst.group.format_word(w))
    report.add("length", len(w))


def cmd_apply(inst, args, report):
    phi = resolve_automorphism(inst, args.aut)
    w = inst.group.parse_word(args.word)
    image = phi.apply(w)
    report.add("aut", args.aut)
    report.add("image", inst.group.format_word(image))
    report.add("length", len(image))


def cmd_orbit(inst, args, report):
    phi = resolve_automorphism(inst, args.aut)
    w = inst.group.parse_word(args.word)
    report.add("aut", args.aut)
    for j in range(args.k + 1):
        report.add(f"orbit[{j}]", inst.group.format_word(w))
        if j < args.k:
            w = phi.apply(w)


def cmd_rational(inst, args, report):
    G = inst.group
    w = G.parse_word(args.word)
    hyperbolic = G.is_hyperbolic(w)
    report.add("hyperbolic", hyperbolic)
    if not hyperbolic:
        raise PreconditionError(
            "elliptic or trivial word has no boundary limit")
    core, conj = G.cyclic_reduce(w)
    report.add("core", G.format_word(core))
    report.add("conjugator", G.format_word(conj))
    ray = G.rational_ray(w)
    show = min(args.depth, 12)
    report.add("prefix", G.format_word(ray.prefix(show)))
    period = G.detect_rational(ray, args.depth, args.max_period)
    report.add("period-detected",
               G.format_word(period) if period is not None else "none")
    if period is None:
        report.fail()


def cmd_traincheck(inst, args, report):
    gm = inst.graph_map(args.map)
    report.add("map", args.map)
    tt = gm.is_train_track(args.kbound)
    report.add("train-track", tt.is_train_track)
    if not tt.is_train_track:
        report.add("witness", tt.witness)
        report.fail()
    report.add("legal-turns-checked", len(tt.certificate))
    lip, qvol, bcc = gm.lip_qvol_bcc()
    report.add("lip", lip)
    report.add("qvol", qvol)
    report.add("bcc-bound", bcc)
    _, _, pf = gm.transition_spectrum()
    report.add("PF", pf)
    irreducible, witness, circuit = gm.o_irreducibility_check()
    report.add("o-irreducible", irreducible)
    if not irreducible:
        report.add("witness-subgraph", " ".join(witness))
        if circuit:
            report.add("witness-circuit", " ".join(circuit))
        report.fail()


def cmd_lamination(inst, args, report):
    gm = inst.graph_map(args.map)
    report.add("map", args.map)
    report.add("depth", args.depth)
    report.add("kmax", args.kmax)
    lang = generate_language(gm, args.depth, args.kmax)
    if lang.train_track_warning:
        report.add("warning", lang.train_track_warning)
    report.add("words-total", len(lang))
    for length, count in lang.count_by_length().items():
        report.add(f"words[{length}]", count)
    if lang.saturated:
        report.add("saturation-k", lang.saturation_k)
    else:
        report.add("saturation-k", "not reached")
        report.fail()
    gen = check_generation_property(lang, gm, kcap=args.gen_kcap)
    if gen.ok:
        report.add("generation-property",
                   f"ok (max k = {gen.max_k}, edges "
                   f"{' '.join(gen.edges_checked)})")
    else:
        report.add("generation-property",
                   f"FAILED at edge {gen.failing[0]} word {gen.failing[1]!r}")
        report.fail()
    from .graphs import OE
    from .lamination import expanding_edges
    seed = expanding_edges(gm)[0]
    segment = gm.iterated_sharp(OE(seed, True), args.segment_power)
    tokens = MarkedGraph.projection_tokens(segment)
    report.add("leaf-segment",
               " ".join(tokens[:40]) + (" ..." if len(tokens) > 40 else ""))
    for L in range(1, min(args.depth, 4) + 1):
        window = quasi_periodicity_constant(gm.graph, segment, L)
        report.add(f"qp[{L}]", window if window is not None else "none")
    trim = gm.bcc_bound()
    stab = stabilizes_language(gm, lang, trim)
    report.add("self-stabilization",
               f"{'ok' if stab.stabilizes else 'FAILED'} ({stab.describe()})")
    if not stab.stabilizes:
        report.fail()


def cmd_ray(inst, args, report):
    gm = inst.graph_map(args.map)
    report.add("map", args.map)
    base = find_base_vertex(gm, args.radius, args.power_cap)
    report.add("base-vertex", base.describe(inst.group))
    split_to = min(args.levels, args.split_levels)
    ray = build_ray(gm, base, args.levels, validate_splittings_to=split_to)
    G = inst.group
    for level in range(1, args.levels + 1):
        seg = ray.segments[level - 1]
        cancel = 0
        if level < len(ray.segments):
            _, cancel = G.concat(seg, ray.segments[level])
        report.add(f"segment[{level}]",
                   f"length {fmt_real(ray.graph.path_length(ray.segment_path(level)))} "
                   f"junction-cancellation {cancel}")
        if cancel:
            report.fail()
    s1 = ray.splitting(1)
    for i, (brick, tag) in enumerate(s1.bricks):
        report.add(f"brick[{i}]",
                   f"{tag} length {fmt_real(ray.graph.path_length(brick))} "
                   f"path {ray.graph.format_path(brick)}")
    for level in range(1, split_to + 1):
        s = ray.splitting(level)
        tags = s.tags()
        adjacent = any(a == b == "singular" for a, b in zip(tags, tags[1:]))
        report.add(f"splitting[{level}]",
                   f"bricks {len(tags)} regular {tags.count('regular')} "
                   f"singular {tags.count('singular')} "
                   f"first {tags[0]} adjacent-singular "
                   f"{'present' if adjacent else 'none'}")
        if adjacent or tags[0] != "regular":
            report.fail()
    l0, bounded = max_singular_length(ray, max(split_to, 1))
    report.add("l0", l0)
    report.add("l0-bounded", bounded)
    report.add("prefix", G.format_word(ray.word_prefix(min(12, args.levels * 2))))
    period = G.detect_rational(ray.ray, args.detect_depth, args.detect_max_period)
    report.add("period-detected",
               G.format_word(period) if period is not None else
               f"none (aperiodic up to depth {args.detect_depth}, "
               f"period <= {args.detect_max_period})")
    report.add("note", "fixed-depth statements are evidence; "
                       "divergence statements are proofs")


def cmd_classify(inst, args, report):
    phi = resolve_automorphism(inst, args.aut)
    ray, _ = resolve_ray(inst, args.ray)
    report.add("aut", args.aut)
    report.add("ray", args.ray)
    verdict = fixes_boundary_point(phi, ray, args.depth)
    if not verdict.fixed:
        report.add("fixed", verdict.describe())
        raise PreconditionError(
            f"classification needs a fixed point; diverges at "
            f"{verdict.diverges_at}")
    report.add("fixed", verdict.describe())
    rng = random.Random(args.seed)
    outcome = classify_fixed_point(phi, ray, args.depth, args.window,
                                   args.samples, budget=args.budget, rng=rng)
    report.add("classification", f"{outcome} (evidence, not certification)")


def cmd_stabcheck(inst, args, report):
    psi = resolve_automorphism(inst, args.aut)
    ray, _ = resolve_ray(inst, args.ray)
    report.add("aut", args.aut)
    report.add("ray", args.ray)
    result = stab_check(psi, ray, args.depth, order_cap=args.order_cap)
    if result.fixed:
        report.add("fixed-to-depth", result.depth)
    else:
        report.add("diverges-at", result.diverges_at)
    report.add("order", result.order_line())
    report.add("factor-direction", result.factor_direction)
    report.add("preserves-each-factor", result.preserves_each_factor)
    report.add("flags", " ".join(result.flags) if result.flags else "none")
    report.add("note", "fixed verdicts are evidence at this depth; "
                       "divergence verdicts are proofs")
    if not result.fixed or result.flags:
        report.fail()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpaut",
        description="exact computation with automorphisms of free products")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("instance", help="instance file path or bundled name")
        p.add_argument("--dump", metavar="PATH",
                       help="write a machine readable key = value sidecar")
        p.add_argument("--seed", type=int, default=7,
                       help="seed for randomized probes (fixed default)")

    p = sub.add_parser("reduce", help="reduce a word")
    common(p)
    p.add_argument("word")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("apply", help="apply an automorphism to a word")
    common(p)
    p.add_argument("aut")
    p.add_argument("word")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("orbit", help="iterate an automorphism on a word")
    common(p)
    p.add_argument("aut")
    p.add_argument("word")
    p.add_argument("k", type=int)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("rational", help="rational boundary point of a word")
    common(p)
    p.add_argument("word")
    p.add_argument("--depth", type=int, default=50)
    p.add_argument("--max-period", type=int, default=4)
    p.set_defaults(func=cmd_rational)

    p = sub.add_parser("traincheck", help="train track and irreducibility checks")
    common(p)
    p.add_argument("map")
    p.add_argument("--kbound", type=int, default=12)
    p.set_defaults(func=cmd_traincheck)

    p = sub.add_parser("lamination", help="laminary language report")
    common(p)
    p.add_argument("map")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--kmax", type=int, default=20)
    p.add_argument("--gen-kcap", type=int, default=15)
    p.add_argument("--segment-power", type=int, default=8)
    p.set_defaults(func=cmd_lamination)

    p = sub.add_parser("ray", help="attractive ray construction report")
    common(p)
    p.add_argument("map")
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--power-cap", type=int, default=4)
    p.add_argument("--split-levels", type=int, default=8)
    p.add_argument("--detect-depth", type=int, default=200)
    p.add_argument("--detect-max-period", type=int, default=20)
    p.set_defaults(func=cmd_ray)

    p = sub.add_parser("classify", help="attractive/repulsive evidence")
    common(p)
    p.add_argument("aut")
    p.add_argument("ray")
    p.add_argument("--depth", type=int, default=200)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--budget", type=int, default=8)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("stabcheck", help="stabilizer membership report")
    common(p)
    p.add_argument("aut")
    p.add_argument("ray")
    p.add_argument("--depth", type=int, default=500)
    p.add_argument("--order-cap", type=int, default=12)
    p.set_defaults(func=cmd_stabcheck)

    return parser


def run(argv, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else 0
    report = Report(out)
    try:
        inst = load_instance(args.instance)
        args.func(inst, args, report)
    except ParseError as exc:
        print(f"parse error: {exc}", file=out)
        return EXIT_PARSE
    except (ValidationError, PreconditionError, FpError) as exc:
        print(f"error: {exc}", file=out)
        return EXIT_VALIDATION
    return report.finish(args.dump)


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
