"""Command-line interface: encode, decode, info, eval, synth, sweep.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 external
backend failure. Diagnostics go to stderr; results go to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .container import bit_allocation_report, container_size, read_container, write_container
from .errors import EXIT_DATA, EXIT_OK, EXIT_USAGE, SplatCodecError
from .metrics import save_png
from .pipeline import EncodeSettings, decode_scene, encode_scene, evaluate, sweep
from .plane_codec import BACKEND_HEVC, BACKEND_IDS, BACKEND_LOSSY
from .quantize import CHANNEL_ALPHA
from .scene import load_scene, save_scene
from .synth import GEOMETRIES, SynthSpec, generate


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size_pair(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"dimensions must be >= 1, got {text!r}")
    return w, h


def _alpha_pair(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or name not in CHANNEL_ALPHA:
        raise argparse.ArgumentTypeError(
            f"expected CHANNEL=VALUE with channel in {sorted(CHANNEL_ALPHA)}, got {text!r}"
        )
    try:
        alpha = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha value {value!r} is not a number")
    if not alpha > 0:
        raise argparse.ArgumentTypeError(f"alpha must be > 0, got {alpha}")
    return name, alpha


def _qg_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_encode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qg", type=int, default=0, help="global quantization parameter")
    p.add_argument("--k", type=int, default=None,
                   help="color components to keep (default min(6, coefficient dim))")
    p.add_argument("--backend", choices=sorted(BACKEND_IDS), default=BACKEND_LOSSY)
    p.add_argument("--alpha", type=_alpha_pair, action="append", default=[],
                   metavar="CHANNEL=VALUE", help="override a channel's step divisor")
    p.add_argument("--no-vpt", action="store_true",
                   help="store world-space positions/rotations/scales instead of "
                        "view-transformed planes")
    p.add_argument("--no-vabr", action="store_true",
                   help="store raw color coefficients instead of reduced components")
    p.add_argument("--hevc-enc", default=None, metavar="PATH", help="HEVC encoder binary")
    p.add_argument("--hevc-dec", default=None, metavar="PATH", help="HEVC decoder binary")
    p.add_argument("--allow-fallback", action="store_true",
                   help="fall back to the internal lossy backend if HEVC is unavailable")


def _settings_from(args) -> EncodeSettings:
    return EncodeSettings(
        qg=args.qg,
        k=args.k,
        backend=args.backend,
        alpha_overrides=dict(args.alpha),
        view_transform=not args.no_vpt,
        basis_reduction=not args.no_vabr,
        hevc_encoder=args.hevc_enc,
        hevc_decoder=args.hevc_dec,
        allow_fallback=args.allow_fallback,
    )


def _fmt_db(value: float) -> str:
    return "inf" if value == float("inf") else f"{value:.2f}"


def _cmd_encode(args) -> int:
    scene = load_scene(args.input)
    cs = encode_scene(scene, _settings_from(args))
    size = write_container(cs, args.output)
    print(f"wrote {args.output}: {size} bytes, {cs.view_count} views, "
          f"{len(cs.planes)} planes, backend {args.backend}")
    return EXIT_OK


def _cmd_decode(args) -> int:
    cs = read_container(args.input)
    scene = decode_scene(cs, hevc_decoder=args.hevc_dec)
    size = save_scene(scene, args.output)
    print(f"wrote {args.output}: {size} bytes, {len(scene.views)} views")
    return EXIT_OK


def _info_rows(path: str) -> tuple[dict, list[tuple[str, int, float]]]:
    cs = read_container(path)
    report = bit_allocation_report(cs)
    rows = [(name, g["bytes"], g["percent"]) for name, g in report["groups"].items()]
    header = {
        "views": cs.view_count,
        "width": cs.width,
        "height": cs.height,
        "sh_degree": cs.sh_degree,
        "k": cs.k,
        "view_transform": cs.view_transform,
        "basis_reduction": cs.basis_reduction,
        "backend": cs.default_backend,
        "total_bytes": report["total_bytes"],
    }
    return header, rows


def _cmd_info(args) -> int:
    header, rows = _info_rows(args.input)
    if args.csv:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["component", "bytes", "percent"])
        for name, nbytes, percent in rows:
            writer.writerow([name, nbytes, f"{percent:.4f}"])
        writer.writerow(["total", header["total_bytes"], "100.0000"])
        return EXIT_OK
    print(f"{args.input}: {header['total_bytes']} bytes")
    print(f"views {header['views']}  resolution {header['width']}x{header['height']}  "
          f"sh_degree {header['sh_degree']}  k {header['k']}")
    print(f"view_transform {'on' if header['view_transform'] else 'off'}  "
          f"basis_reduction {'on' if header['basis_reduction'] else 'off'}  "
          f"backend {header['backend']}")
    print(f"{'component':<10} {'bytes':>10} {'percent':>8}")
    for name, nbytes, percent in rows:
        print(f"{name:<10} {nbytes:>10} {percent:>8.2f}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    scene = load_scene(args.original)
    cs = read_container(args.input)
    decoded = decode_scene(cs, hevc_decoder=args.hevc_dec)
    want_images = args.out_dir is not None
    result = evaluate(
        scene, decoded,
        container_bytes=container_size(cs),
        render_size=args.render_size,
        return_images=want_images,
    )
    print(f"{'view':<6} {'psnr_db':>9} {'ssim':>8}")
    for row in result["views"]:
        print(f"{row['view']:<6} {_fmt_db(row['psnr']):>9} {row['ssim']:>8.4f}")
    print(f"{'mean':<6} {_fmt_db(result['psnr_mean']):>9} {result['ssim_mean']:>8.4f}")
    print(f"raw {result['raw_bytes']} bytes, container {result['container_bytes']} bytes, "
          f"ratio {result['compression_ratio']:.2f}x")
    if want_images:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for vi, (img_o, img_d) in enumerate(result["images"]):
            save_png(img_o, out / f"view{vi:03d}_original.png")
            save_png(img_d, out / f"view{vi:03d}_decoded.png")
        print(f"images written to {out}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        seed=args.seed,
        views=args.views,
        geometry=args.geometry,
        resolution=args.res,
        sh_degree=args.sh_degree,
        radius=args.radius,
        spread_deg=args.spread,
        noise_offset=args.noise,
        noise_scale=args.noise_scale,
    )
    scene = generate(spec)
    size = save_scene(scene, args.output)
    print(f"wrote {args.output}: {size} bytes, {len(scene.views)} views, "
          f"{scene.record_count()} records")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    scene = load_scene(args.input)
    qgs = args.qg
    args.qg = 0  # per-point QP is supplied by the sweep itself
    rows = sweep(scene, qgs, _settings_from(args), render_size=args.render_size)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["qg", "bytes", "psnr", "ssim"])
    for row in rows:
        writer.writerow([row["qg"], row["bytes"], _fmt_db(row["psnr"]), f"{row['ssim']:.4f}"])
    if args.csv:
        Path(args.csv).write_text(buf.getvalue())
        print(f"wrote {args.csv}: {len(rows)} rows")
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splatcodec",
                     description="Codec for pixel-aligned Gaussian-splat scenes.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("encode", help="compress a .gsmap scene into a .tspl container")
    p.add_argument("input", help=".gsmap scene")
    p.add_argument("output", help=".tspl container")
    _add_encode_flags(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="reconstruct a .gsmap scene from a container")
    p.add_argument("input", help=".tspl container")
    p.add_argument("output", help=".gsmap scene")
    p.add_argument("--hevc-dec", default=None, metavar="PATH")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("info", help="show header and per-component byte allocation")
    p.add_argument("input", help=".tspl container")
    p.add_argument("--csv", action="store_true", help="emit CSV on stdout")
    p.set_defaults(func=_cmd_info)

    p = sub.add_parser("eval", help="score a container against its original scene")
    p.add_argument("original", help=".gsmap scene")
    p.add_argument("input", help=".tspl container")
    p.add_argument("--render-size", type=_size_pair, default=None, metavar="WxH")
    p.add_argument("--out-dir", default=None, help="write rendered PNG pairs here")
    p.add_argument("--hevc-dec", default=None, metavar="PATH")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a deterministic synthetic scene")
    p.add_argument("output", help=".gsmap scene to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--views", type=int, default=2)
    p.add_argument("--res", type=_size_pair, default=(64, 64), metavar="WxH")
    p.add_argument("--geometry", choices=sorted(GEOMETRIES), default="plane")
    p.add_argument("--sh-degree", type=int, default=1)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--spread", type=float, default=24.0, help="camera ring arc in degrees")
    p.add_argument("--noise", type=float, default=0.0,
                   help="pixel-center jitter in pixels (0 = exactly pixel-aligned)")
    p.add_argument("--noise-scale", type=float, default=0.0,
                   help="log-scale jitter on footprints")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sweep", help="rate-distortion sweep over global QPs")
    p.add_argument("input", help=".gsmap scene")
    p.add_argument("--qg", type=_qg_list, default=[0, 3, 6, 12],
                   metavar="N,N,...", help="global QPs to encode at")
    p.add_argument("--csv", default=None, metavar="PATH", help="write rows to a CSV file")
    p.add_argument("--render-size", type=_size_pair, default=None, metavar="WxH")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--backend", choices=sorted(BACKEND_IDS), default=BACKEND_LOSSY)
    p.add_argument("--alpha", type=_alpha_pair, action="append", default=[],
                   metavar="CHANNEL=VALUE")
    p.add_argument("--no-vpt", action="store_true")
    p.add_argument("--no-vabr", action="store_true")
    p.add_argument("--hevc-enc", default=None, metavar="PATH")
    p.add_argument("--hevc-dec", default=None, metavar="PATH")
    p.add_argument("--allow-fallback", action="store_true")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SplatCodecError as exc:
        print(f"splatcodec: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"splatcodec: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
