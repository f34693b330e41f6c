"""Command line front end: ``k3mod <command> ...``.

Exit codes: 0 success, 1 table mismatch under --check, 2 usage or parse
error, 3 capacity exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .exact import DomainError, det, inverse
from .fqf import FQF, CapacityError, brown_invariant, normal_form
from .moduli import MarkingGroupSpec, compute_components, parse_torsion, torsion_str
from .padic import DEFAULT_RETRIES, CapacityExceeded, psi_p
from .torsion import narrowness_report, render_signature
from .zlattice import (
    AdeConfiguration,
    GenusSymbol,
    definite_genus_representatives,
    fqf_from_gram,
    genus_nonempty,
    read_gram_file,
)

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3

_LETTER_ORDER = {"E": 0, "D": 1, "A": 2}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# case keys and the result cache
# ---------------------------------------------------------------------------


def canonical_phi(phi: str) -> str:
    config = AdeConfiguration.parse(phi)
    comps = sorted(config.components, key=lambda c: (_LETTER_ORDER[c[0]], -c[1]))
    return str(AdeConfiguration(tuple(comps)))


@dataclass(frozen=True)
class CaseKey:
    phi: str
    torsion: str
    group: str

    @staticmethod
    def make(phi: str, tor: str, group: MarkingGroupSpec) -> "CaseKey":
        if group.kind == "explicit":
            # explicit permutations refer to the root order as written
            gkey = "explicit:" + ";".join(",".join(map(str, p)) for p in group.perms)
            return CaseKey(str(AdeConfiguration.parse(phi)), torsion_str(parse_torsion(tor)), gkey)
        return CaseKey(canonical_phi(phi), torsion_str(parse_torsion(tor)), group.kind)

    def __str__(self) -> str:
        return f"{self.phi}|{self.torsion}|{self.group}"


class ResultCache:
    """JSON files named by a hash of the case key and package version."""

    def __init__(self, directory: Optional[str]):
        self.directory = directory

    def _path(self, key: CaseKey) -> str:
        h = hashlib.sha256(f"{key}|{__version__}".encode()).hexdigest()[:32]
        return os.path.join(self.directory, f"{h}.json")

    def get(self, key: CaseKey) -> Optional[dict]:
        if not self.directory:
            return None
        try:
            with open(self._path(key)) as fh:
                entry = json.load(fh)
        except (OSError, ValueError):
            return None
        if entry.get("key") != str(key):
            return None
        return entry["report"]

    def put(self, key: CaseKey, report: dict) -> None:
        if not self.directory:
            return
        os.makedirs(self.directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump({"key": str(key), "version": __version__, "report": report}, fh)
            os.replace(tmp, self._path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def cache_dir(arg: Optional[str]) -> str:
    if arg is not None:
        return arg
    return os.environ.get("K3MOD_CACHE", ".k3cache")


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------


def parse_group(text: str) -> MarkingGroupSpec:
    if text in ("aut", "trivial"):
        return MarkingGroupSpec(text)
    if not os.path.exists(text):
        raise UsageError(f"--group must be aut, trivial or a file of permutations: {text!r}")
    with open(text) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    return MarkingGroupSpec.parse(";".join(lines))


def run_case(phi: str, tor: str, group: MarkingGroupSpec, cache: ResultCache,
             retries: int = DEFAULT_RETRIES, nu0: Optional[int] = None) -> dict:
    key = CaseKey.make(phi, tor, group)
    hit = cache.get(key)
    if hit is not None:
        return hit
    # compute from the key so cold and warm runs print the same phi
    report = compute_components(key.phi, tor, group, retries=retries, nu0=nu0).as_json()
    cache.put(key, report)
    return report


def render_report(rep: dict) -> str:
    lines = [f"phi: {rep['phi']}  torsion: {torsion_str(rep['torsion'])}  group: {rep['group']}"]
    if "note" in rep:
        lines.append(rep["note"])
    for i, c in enumerate(rep["classes"], 1):
        gb = c["gbar_order"] if c["gbar_order"] is not None else "?"
        lines.append(
            f"class {i} ({c['branch']}, orbit {c['orbit_size']}, |Stab| {c['stab_order']}, |Gbar| {gb}): "
            f"count {c['count']}, mod conjugation {c['conj_count']}"
        )
        if c["branch"] == "definite":
            rcs = [c["rc"]] if len(c["forms"]) == 1 else c["rc"]
            for f, rc in zip(c["forms"], rcs):
                lines.append(f"  {_compact(f)} {_compact(rc)}")
        else:
            lines.append(f"  dim {c['dim']}, conj_dim {c['conj_dim']}")
    lines.append(f"total {rep['total']}  total_mod_conj {rep['total_mod_conj']}")
    return "\n".join(lines)


def _compact(x) -> str:
    return json.dumps(x, separators=(",", ":"))


def cmd_components(args) -> int:
    group = parse_group(args.group)
    rep = run_case(args.phi, args.tor, group, ResultCache(cache_dir(args.cache_dir)),
                   args.max_retries, args.nu0)
    if args.json:
        print(json.dumps(rep))
    else:
        print(render_report(rep))
    return EXIT_OK


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


@dataclass
class GoldenRow:
    no: int
    phi: str
    torsion: str
    classes: List[List[Tuple[str, str]]]  # table I: per class, (form, rc)
    counts: List[int]  # table II


def load_table(which: int) -> Dict[int, GoldenRow]:
    name = f"table{which}.tsv"
    text = resources.files("k3mod").joinpath("data", name).read_text()
    rows: Dict[int, GoldenRow] = {}
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        parts = line.split("\t")
        no = int(parts[0])
        if which == 1:
            _, phi, tor, cls, form, rc = parts
            row = rows.setdefault(no, GoldenRow(no, phi, tor, [], []))
            k = int(cls) - 1
            while len(row.classes) <= k:
                row.classes.append([])
            row.classes[k].append((form, rc))
        else:
            _, _, phi, tor, counts = parts
            rows[no] = GoldenRow(no, phi, tor, [], [int(x) for x in re.findall(r"\d+", counts)])
    return rows


def parse_rows(text: Optional[str], available: Sequence[int]) -> List[int]:
    if not text:
        return list(available)
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            out += list(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    bad = [n for n in out if n not in available]
    if bad:
        raise UsageError(f"rows out of range: {bad}")
    return out


def computed_table_lines(which: int, row: GoldenRow, rep: dict) -> Tuple[list, List[str]]:
    """(comparable value, printable lines) of a recomputed row."""
    if which == 1:
        classes = []
        for c in rep["classes"]:
            rcs = [c["rc"]] if len(c["forms"]) == 1 else c["rc"]
            classes.append(sorted((_compact(f), _compact(rc)) for f, rc in zip(c["forms"], rcs)))
        classes.sort()
        lines = [f"{row.phi} {row.torsion} {f} {rc}" for cl in classes for f, rc in cl]
        return classes, lines
    counts = sorted(c["count"] for c in rep["classes"] if c["count"] > 0)
    return counts, [f"{row.phi} {row.torsion} {_compact(counts)}"]


def golden_value(which: int, row: GoldenRow):
    if which == 1:
        return sorted(sorted((f.replace(" ", ""), rc.replace(" ", "")) for f, rc in cl) for cl in row.classes)
    return sorted(row.counts)


def _table_job(job):
    phi, tor, cdir, retries, nu0 = job
    return run_case(phi, tor, MarkingGroupSpec("aut"), ResultCache(cdir), retries, nu0)


def cmd_tables(args) -> int:
    which = args.which
    table = load_table(which)
    rows = parse_rows(args.rows, sorted(table))
    cdir = cache_dir(args.cache_dir)
    jobs = [(table[n].phi, table[n].torsion, cdir, args.max_retries, args.nu0) for n in rows]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            reports = list(ex.map(_table_job, jobs))
    else:
        reports = [_table_job(j) for j in jobs]
    status = EXIT_OK
    for n, rep in zip(rows, reports):
        row = table[n]
        value, lines = computed_table_lines(which, row, rep)
        for ln in lines:
            print(ln)
        if args.check:
            want = golden_value(which, row)
            if value != want:
                status = EXIT_MISMATCH
                print(f"MISMATCH row {n}: computed {value} expected {want}", file=sys.stderr)
    return status


# ---------------------------------------------------------------------------
# thin wrappers
# ---------------------------------------------------------------------------


def parse_matrix(text: str) -> List[List[Fraction]]:
    return [[Fraction(x) for x in row.replace(",", " ").split()] for row in text.split(";") if row.strip()]


def form_from_args(orders: str, q: str) -> FQF:
    ords = [int(x) for x in orders.replace(",", " ").split()]
    F = parse_matrix(q)
    n = len(ords)
    if ";" not in q and len(F) == 1 and len(F[0]) == n:
        F = [[F[0][i] if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    if len(F) != len(ords) or any(len(r) != len(ords) for r in F):
        raise UsageError("--q must give one value per generator or a full matrix")
    return FQF.make(ords, F)


def cmd_spin(args) -> int:
    q = form_from_args(args.orders, args.q)
    if q.primes != [args.p]:
        raise UsageError(f"the form is not {args.p}-primary")
    T = [[int(x) for x in r] for r in parse_matrix(args.auto)]
    if not q.is_automorphism(T):
        raise UsageError("--auto is not an automorphism of the form")
    F = [[Fraction(x) for x in r] for r in q.F]
    r = args.r if args.r is not None else q.length
    d = Fraction(args.d) if args.d is not None else det(inverse(F))
    g = psi_p(q, T, r, d, args.max_retries, args.nu0)
    print(g.render())
    return EXIT_OK


def _form_source(args) -> FQF:
    if getattr(args, "trivial", False):
        return FQF.trivial()
    if args.gram:
        return fqf_from_gram(read_gram_file(args.gram))
    if args.orders and args.q:
        return form_from_args(args.orders, args.q)
    raise UsageError("give --gram FILE, --orders with --q, or --trivial")


def cmd_fqf(args) -> int:
    q = _form_source(args)
    if args.brown:
        print(brown_invariant(q))
        return EXIT_OK
    nf = normal_form(q)
    print(" + ".join(nf.labels()) or "trivial")
    print(f"brown {brown_invariant(q)}")
    return EXIT_OK


def cmd_genus(args) -> int:
    try:
        sp, sm = (int(x) for x in args.sig.split(","))
    except ValueError:
        raise UsageError("--sig expects s_plus,s_minus") from None
    q = _form_source(args)
    g = GenusSymbol(sp, sm, q)
    if not genus_nonempty(g):
        print("empty")
        return EXIT_OK
    print("nonempty")
    if (sp, sm) == (2, 0):
        for f in definite_genus_representatives(g):
            print(f)
    return EXIT_OK


def cmd_torsion(args) -> int:
    group = parse_group(args.group)
    entries = narrowness_report(args.phi, args.tor, group)
    for i, e in enumerate(entries, 1):
        print(f"class {i} (orbit {e.orbit_size}): {render_signature(e.signature)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="k3mod", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"k3mod {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cached=True):
        p.add_argument("--max-retries", type=int, default=DEFAULT_RETRIES,
                       help="accuracy doublings allowed per lift")
        p.add_argument("--nu0", type=int, default=None, help="initial p-adic accuracy")
        if cached:
            p.add_argument("--cache-dir", default=None, help="result cache (default $K3MOD_CACHE or ./.k3cache)")

    p = sub.add_parser("components", help="count connected components for one type")
    p.add_argument("--phi", required=True)
    p.add_argument("--tor", default="[1]")
    p.add_argument("--group", default="aut", help="aut, trivial or a file of root permutations")
    p.add_argument("--json", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_components)

    p = sub.add_parser("tables", help="recompute rows of the bundled tables")
    p.add_argument("which", type=int, choices=(1, 2))
    p.add_argument("--rows", default=None, help="e.g. 1,3,7-9 (default: all)")
    p.add_argument("--check", action="store_true", help="compare with the bundled values")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("spin", help="(det, spin) class of a discriminant automorphism")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--orders", required=True, help="generator orders, e.g. 3 or 2,2")
    p.add_argument("--q", required=True, help="diagonal q values or a full matrix 'a,b;b,c'")
    p.add_argument("--auto", required=True, help="automorphism matrix, rows separated by ';'")
    p.add_argument("--r", type=int, default=None, help="rank of the ambient Z_p-lattice")
    p.add_argument("--d", default=None, help="its determinant (default det of the inverse q matrix)")
    common(p, cached=False)
    p.set_defaults(func=cmd_spin)

    for name, func, hlp in (("fqf", cmd_fqf, "normal form and Brown invariant"),
                            ("genus", cmd_genus, "existence of a genus")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--gram", default=None, help="file with an integral Gram matrix")
        p.add_argument("--orders", default=None)
        p.add_argument("--q", default=None)
        p.add_argument("--trivial", action="store_true", help="the trivial form")
        if name == "fqf":
            p.add_argument("--brown", action="store_true")
        else:
            p.add_argument("--sig", required=True, help="s_plus,s_minus")
        p.set_defaults(func=func)

    p = sub.add_parser("torsion", help="narrowness of torsion sections per class")
    p.add_argument("--phi", required=True)
    p.add_argument("--tor", required=True)
    p.add_argument("--group", default="aut")
    p.set_defaults(func=cmd_torsion)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CapacityError, CapacityExceeded) as exc:
        print(f"k3mod: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (UsageError, DomainError, ValueError, OSError) as exc:
        print(f"k3mod: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
