"""Command-line interface: ``sheetmidi <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
from PIL import Image

from . import bootleg as bs
from . import fixtures as fx
from .config import HyperParams, load_config
from .errors import SheetMidiError
from .harness import batch_evaluate
from .pipeline import extract_query, load_midi_bootleg, run_query
from .server import match_response, serve

log = logging.getLogger("sheetmidi")


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="INI config file (default: $SHEETMIDI_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    group = parser.add_argument_group("hyperparameters")
    for f in fields(HyperParams):
        group.add_argument(f"--{f.name.replace('_', '-')}", dest=f"hp_{f.name}", metavar="VALUE")


def _params(args) -> HyperParams:
    overrides = {k[3:]: v for k, v in vars(args).items() if k.startswith("hp_") and v is not None}
    return load_config(args.config, overrides)


def _save_debug(images: dict, out_dir: str):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, img in images.items():
        arr = np.clip(np.asarray(img, dtype=np.float32) * 255, 0, 255).astype(np.uint8)
        Image.fromarray(arr).save(out / f"{name}.png")


def render_bootleg(score: bs.BootlegScore, cell: int = 4) -> np.ndarray:
    """Bootleg score drawn like sheet music: high rows at the top, staff lines in gray."""
    mat = score.as_matrix()[::-1]
    img = np.ones((bs.NUM_ROWS * cell, max(score.width, 1) * cell), dtype=np.float32)
    # staff lines: E4 G4 B4 D5 F5 (rows 35..43 step 2) and G2 B2 D3 F3 A3 (rows 13..21)
    for row in list(range(35, 44, 2)) + list(range(13, 22, 2)):
        y = (bs.NUM_ROWS - 1 - row) * cell + cell // 2
        img[y, :] = 0.7
    rr, cc = np.nonzero(mat)
    for r, c in zip(rr, cc):
        img[r * cell:(r + 1) * cell, c * cell:(c + 1) * cell] = 0.0
    return img


def cmd_extract_midi(args):
    params = _params(args)
    midi = load_midi_bootleg(Path(args.inp), params)
    Path(args.out).write_bytes(bs.serialize(midi.score))
    print(json.dumps({"events": midi.num_events, "columns": midi.score.width}))


def cmd_extract_image(args):
    params = _params(args)
    ex = extract_query(Path(args.inp).read_bytes(), params, debug=bool(args.debug_images))
    score = ex.bootleg.score if ex.bootleg else bs.BootlegScore(np.zeros((0, bs.NUM_ROWS)))
    if args.save_features:
        Path(args.save_features).write_bytes(bs.serialize(score))
    if args.debug_images:
        if ex.bootleg:
            ex.debug["query_bootleg"] = render_bootleg(score)
        _save_debug(ex.debug, args.debug_images)
    print(json.dumps({"columns": score.width, "noteheads": len(ex.noteheads), "staves": len(ex.staves),
                      "grand_staves": len(ex.grand_staves), "failure": ex.failure}))
    return 0 if ex.bootleg else 1


def cmd_match(args):
    params = _params(args)
    res = run_query(Path(args.image).read_bytes(), Path(args.midi), params, debug=bool(args.debug_images))
    if args.save_features:
        Path(args.save_features).write_bytes(res.features)
    if args.debug_images and res.extraction:
        if res.extraction.bootleg:
            res.extraction.debug["query_bootleg"] = render_bootleg(res.extraction.bootleg.score)
        _save_debug(res.extraction.debug, args.debug_images)
    out = match_response(res.alignment) if res.alignment else {
        "start_sec": res.interval.start, "end_sec": res.interval.end, "cost": None,
        "ref_start_col": None, "ref_end_col": None,
        "failure": res.extraction.failure if res.extraction else None}
    out["timings"] = res.timings
    print(json.dumps(out, indent=2))


def cmd_evaluate(args):
    params = _params(args)
    report = batch_evaluate(args.manifest, params, workers=args.workers,
                            averaging="macro" if args.macro else "micro", report_path=args.report)
    print(f"P={report.precision:.3f} R={report.recall:.3f} F={report.f_measure:.3f} "
          f"({len(report.queries)} queries, {len(report.missing)} missing files)")
    for stage, t in report.timing.items():
        print(f"  {stage:<28} {t['per_query_sec']:.3f}s {t['percent']:5.1f}%")


def cmd_fixtures(args):
    if args.spec:
        spec = fx.spec_from_dict(json.loads(Path(args.spec).read_text()))
        fixture = fx.render_fixture(spec)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "page.png").write_bytes(fixture.png_bytes())
        (out / "truth.json").write_text(json.dumps([vars(n) for n in fixture.notes], indent=1))
        print(out / "page.png")
        return
    manifest = fx.write_corpus(args.out, args.count, args.pieces, args.seed)
    print(manifest)


def cmd_serve(args):
    params = _params(args)
    registry = {}
    for item in args.piece or []:
        pid, _, path = item.partition("=")
        registry[pid] = load_midi_bootleg(Path(path), params)
    if args.midi_dir:
        for path in sorted(Path(args.midi_dir).glob("*.mid")):
            registry[path.stem] = load_midi_bootleg(path, params)
    serve(args.port, registry, args.host, params)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sheetmidi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-midi", help="MIDI file -> BSCR bootleg score")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_midi)

    p = sub.add_parser("extract-image", help="sheet music photo -> query bootleg score")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--save-features")
    p.add_argument("--debug-images", metavar="DIR")
    p.set_defaults(func=cmd_extract_image)

    p = sub.add_parser("match", help="photo + MIDI -> matching time interval (JSON)")
    p.add_argument("--image", required=True)
    p.add_argument("--midi", required=True)
    p.add_argument("--save-features")
    p.add_argument("--debug-images", metavar="DIR")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", help="run a JSONL manifest and report P/R/F and timing")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--macro", action="store_true", help="macro-average instead of micro")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fixtures", help="render a synthetic corpus (or one page from --spec JSON)")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=25)
    p.add_argument("--pieces", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", help="JSON page spec to render instead of a corpus")
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("serve", help="HTTP match service over registered MIDI pieces")
    p.add_argument("--port", type=int, default=8800)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--piece", action="append", metavar="ID=PATH")
    p.add_argument("--midi-dir")
    p.set_defaults(func=cmd_serve)

    for p in sub.choices.values():
        _add_common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except SheetMidiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
