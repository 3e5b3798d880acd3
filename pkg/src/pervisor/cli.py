"""Command-line entry point; every subcommand is a thin adapter.

Machine-readable results (TSV) go to stdout, diagnostics to stderr.
Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import featuredb, geonav, match, morph, recognizer, service, surf
from .imagecore import PgmError, encode_pgm, load_pgm


def _seed() -> int:
    return int(os.environ.get("PERVISOR_SEED", "42"))


def _checks(value: str) -> int | None:
    if value.lower() in ("unlimited", "inf", "none"):
        return None
    return int(value)


def _load_db(path) -> featuredb.FeatureDb:
    return featuredb.load(path)


def cmd_db_add(args) -> int:
    path = Path(args.db)
    db = featuredb.load(path) if path.exists() else featuredb.FeatureDb()
    img = load_pgm(args.image)
    object_id, count = featuredb.add_object(
        db, args.name, args.meta, img, threshold=args.threshold
    )
    featuredb.save(db, path)
    if count == 0:
        print(f"warning: no features extracted from {args.image}", file=sys.stderr)
    print(f"{object_id}\t{args.name}\t{count}")
    return 0


def cmd_db_info(args) -> int:
    db = _load_db(args.db)
    print(f"objects\t{len(db.objects)}")
    print(f"features\t{len(db.records)}")
    for o in db.objects:
        print(f"{o.object_id}\t{o.name}\t{db.feature_count(o.object_id)}")
    return 0


def cmd_extract(args) -> int:
    img = load_pgm(args.image)
    result = surf.extract(img, threshold=args.threshold)
    print("x\ty\tscale\torientation\tsign")
    for pt, _ in result.features:
        print(f"{pt.x:.2f}\t{pt.y:.2f}\t{pt.scale:.4f}\t{pt.orientation:.6f}\t{pt.laplacian_sign}")
    if result.skipped:
        print(f"skipped {result.skipped} boundary points", file=sys.stderr)
    return 0


def cmd_match(args) -> int:
    db = _load_db(args.db)
    forest = featuredb.build_index(db, seed=_seed())
    img = load_pgm(args.image)
    rec = recognizer.recognize(
        db,
        forest,
        img,
        ratio=args.ratio,
        checks=args.checks,
        min_matches=args.min_matches,
        sign_filter=not args.no_sign_filter,
        threshold=args.threshold,
        use_linear=args.linear,
    )
    if rec.object_id is None:
        print(f"no-match\t{rec.match_count}\t{rec.total_query_features}")
    else:
        print(
            f"{rec.object_id}\t{rec.object_name}\t{rec.match_count}\t"
            f"{rec.total_query_features}\t{rec.score:.4f}"
        )
    return 0


def cmd_serve(args) -> int:
    config = service.RecognizerConfig(
        ratio=args.ratio,
        checks=args.checks,
        min_matches=args.min_matches,
        sign_filter=not args.no_sign_filter,
        threshold=args.threshold,
        seed=_seed(),
    )
    print(f"serving {args.db} on {args.bind}:{args.port}", file=sys.stderr)
    service.serve(args.db, args.bind, args.port, config)
    return 0


def cmd_recognize(args) -> int:
    host, _, port = args.server.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"--server must be HOST:PORT, got {args.server!r}")
    img = load_pgm(args.image)
    rec = service.client_recognize(host, int(port), encode_pgm(img))
    if rec.object_id is None:
        print(f"no-match\t{rec.match_count}\t{rec.total_query_features}")
    else:
        print(
            f"{rec.object_id}\t{rec.object_name}\t{rec.match_count}\t"
            f"{rec.total_query_features}\t{rec.score:.4f}"
        )
    return 0


def cmd_geo_filter(args) -> int:
    user = geonav.GeoPoint(args.lat, args.lon)
    pois = geonav.load_pois_csv(args.pois)
    selected = geonav.filter_pois(user, pois, args.radius, args.max)
    with_sector = args.heading is not None
    header = "id\tname\tpriority\tdistance_m"
    if with_sector:
        header += "\tbearing_deg\tsector"
    print(header)
    for poi in selected:
        d = geonav.haversine_distance(user, poi.location)
        line = f"{poi.id}\t{poi.name}\t{poi.priority}\t{d:.1f}"
        if with_sector:
            pl = geonav.place_annotation(user, args.heading, poi)
            line += f"\t{pl.bearing_deg:.1f}\t{pl.sector.name}"
        print(line)
    return 0


def cmd_morph(args) -> int:
    src = load_pgm(args.src)
    dst = load_pgm(args.dst)
    pair = morph.load_contours(args.contours) if args.contours else None
    seq = morph.morph_sequence(src, dst, pair, args.frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .imagecore import save_pgm

    for k, frame in enumerate(seq.frames):
        save_pgm(frame, out / f"frame_{k:03d}.pgm")
    print(f"wrote {len(seq.frames)} frames to {out}", file=sys.stderr)
    return 0


def _add_recognizer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ratio", type=float, default=recognizer.DEFAULT_RATIO)
    p.add_argument("--checks", type=_checks, default=match.DEFAULT_CHECKS,
                   help="candidate budget, or 'unlimited' for exact search")
    p.add_argument("--min-matches", type=int, default=recognizer.DEFAULT_MIN_MATCHES)
    p.add_argument("--no-sign-filter", action="store_true")
    p.add_argument("--threshold", type=float, default=surf.DEFAULT_THRESHOLD)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pervisor")
    sub = parser.add_subparsers(dest="command", required=True)

    db = sub.add_parser("db", help="feature database maintenance")
    dbsub = db.add_subparsers(dest="db_command", required=True)
    p = dbsub.add_parser("add", help="enroll an image as a new object")
    p.add_argument("--db", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--meta", default="")
    p.add_argument("--threshold", type=float, default=surf.DEFAULT_THRESHOLD)
    p.add_argument("image")
    p.set_defaults(func=cmd_db_add)
    p = dbsub.add_parser("info", help="print object/feature counts")
    p.add_argument("--db", required=True)
    p.set_defaults(func=cmd_db_info)

    p = sub.add_parser("extract", help="detect features, print TSV")
    p.add_argument("image")
    p.add_argument("--threshold", type=float, default=surf.DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("match", help="recognize an image offline")
    p.add_argument("--db", required=True)
    p.add_argument("image")
    _add_recognizer_flags(p)
    p.add_argument("--linear", action="store_true",
                   help="brute-force scan instead of the KD-forest")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("serve", help="run the recognition server")
    p.add_argument("--db", required=True)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    _add_recognizer_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("recognize", help="query a running server")
    p.add_argument("--server", required=True, help="HOST:PORT")
    p.add_argument("image")
    p.set_defaults(func=cmd_recognize)

    geo = sub.add_parser("geo", help="geospatial tools")
    geosub = geo.add_subparsers(dest="geo_command", required=True)
    p = geosub.add_parser("filter", help="POIs within a radius, ranked")
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--radius", type=float, required=True, help="meters")
    p.add_argument("--max", type=int, default=10)
    p.add_argument("--heading", type=float, default=None,
                   help="degrees from north; adds bearing/sector columns")
    p.add_argument("pois")
    p.set_defaults(func=cmd_geo_filter)

    p = sub.add_parser("morph", help="write a morphing frame sequence")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--contours", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_morph)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        PgmError,
        featuredb.DbFormatError,
        morph.ContourFormatError,
        match.EmptyIndexError,
        service.ProtocolError,
        service.ServerError,
        service.ConnectError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
