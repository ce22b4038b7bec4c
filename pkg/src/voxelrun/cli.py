"""``voxelrun`` command line interface.

Exit status is 0 on success, 1 on a domain or I/O error, and 2 on a
usage error. Diagnostics go to stderr; results go to files under
``--out`` (or stdout for ``info`` and ``validate``).
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import design as dsg
from . import pipeline, report
from ._fileio import atomic_write
from .exceptions import VoxelrunError
from .imageops import SmoothSpec, gaussian_smooth
from .nifti import HEADER_SIZE, load_image, parse_header, save_image

log = logging.getLogger("voxelrun")


def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--out", metavar="DIR", default=default if suppress else ".",
                        help="output directory (default: current directory)")
    parser.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="only report errors")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="voxelrun",
        description="Single-run FMRI analysis and reproducible pipeline runner.")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _common(p, suppress=True)
        return p

    p = add("info", "print NIfTI header, shape and affine")
    p.add_argument("image")

    p = add("fetch", "download files listed in a hashes.json manifest")
    p.add_argument("manifest")
    p.add_argument("--base-url", required=True, metavar="URL")
    p.add_argument("--dest", required=True, metavar="DIR")

    p = add("validate", "check files against a hashes.json manifest")
    p.add_argument("manifest")
    p.add_argument("--root", default=".", metavar="DIR")

    p = add("design", "build a design matrix from condition files")
    p.add_argument("events", nargs="*")
    p.add_argument("--tr", type=float, required=True, metavar="T")
    p.add_argument("--n-scans", type=int, required=True, metavar="N")
    p.add_argument("--drift", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--dt-frac", type=int, default=100)
    p.add_argument("--drop", type=int, default=0, metavar="N")

    p = add("diagnose", "outlier-volume diagnostics (vol_std, RMS difference)")
    p.add_argument("image")
    p.add_argument("--drop", type=int, default=4, metavar="N")
    p.add_argument("--scale", type=float, default=1.5)
    p.add_argument("--events", nargs="*", default=[], metavar="FILE",
                   help="condition files; enables the residual-variance comparison")
    p.add_argument("--tr", type=float, default=None, metavar="T")
    p.add_argument("--drift", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--mask-fraction", type=float, default=0.2, metavar="F")

    p = add("smooth", "Gaussian spatial smoothing")
    p.add_argument("image")
    p.add_argument("--fwhm", type=float, required=True, metavar="MM")
    p.add_argument("-o", "--output", default=None, metavar="FILE")

    p = add("glm", "voxelwise GLM with contrast t and p maps")
    p.add_argument("image")
    p.add_argument("events", nargs="+")
    p.add_argument("--contrast", action="append", default=[], metavar="\"c1 c2 ...\"",
                   help="contrast weights, optionally prefixed 'name='; repeatable")
    p.add_argument("--alpha", type=float, default=0.05, metavar="A")
    p.add_argument("--fwhm", type=float, default=None, metavar="MM")
    p.add_argument("--mask-fraction", type=float, default=0.2, metavar="F")
    p.add_argument("--tr", type=float, default=None, metavar="T")
    p.add_argument("--drift", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--drop", type=int, default=0, metavar="N")
    p.add_argument("--dt-frac", type=int, default=100)
    p.add_argument("--one-sided", action="store_true")
    p.add_argument("--rmap", action="store_true", help="also write correlation maps")

    p = add("run", "bring a pipeline target up to date")
    p.add_argument("target", nargs="?", default=None)
    p.add_argument("-f", "--file", default=pipeline.DEFAULT_PIPELINE, metavar="FILE")
    p.add_argument("--hash", action="store_true",
                   help="decide staleness by prerequisite content hashes")

    p = add("report", "write report.md from eda and analysis outputs")
    p.add_argument("--eda", default=None, metavar="DIR")
    p.add_argument("--analysis", default=None, metavar="DIR")
    return parser


def cmd_info(args):
    with open(args.image, "rb") as fobj:
        hdr = parse_header(fobj.read(HEADER_SIZE))
    img = load_image(args.image)
    print(f"file: {args.image}")
    print(f"byte_order: {hdr.byte_order}")
    print(f"datatype: {hdr.datatype} (bitpix {hdr.bitpix})")
    print(f"shape: {' '.join(map(str, hdr.shape))}")
    print(f"voxel_size_mm: {' '.join(f'{v:g}' for v in hdr.pixdim[1:4])}")
    print(f"tr_s: {img.tr_s:g}")
    print(f"scl_slope: {hdr.scl_slope:g} scl_inter: {hdr.scl_inter:g}")
    print(f"sform_code: {hdr.sform_code}")
    print("affine:")
    for row in img.affine:
        print("  " + " ".join(f"{v:10.4f}" for v in row))
    return 0


def cmd_fetch(args):
    manifest = pipeline.load_manifest(args.manifest)
    got = pipeline.fetch_manifest(manifest, args.base_url, args.dest)
    log.info("fetched %d of %d file(s)", len(got), len(manifest.entries))
    return 0


def cmd_validate(args):
    manifest = pipeline.load_manifest(args.manifest)
    bad = 0
    for check in pipeline.validate_files(manifest, args.root):
        if check.ok:
            print(f"ok {check.path}")
        elif check.status == "missing":
            bad += 1
            print(f"missing {check.path}")
        else:
            bad += 1
            print(f"mismatch {check.path} {check.actual}")
    if bad:
        log.error("%d file(s) failed validation", bad)
        return 1
    return 0


def cmd_design(args):
    os.makedirs(args.out, exist_ok=True)
    dm = report.run_design(args.events, args.n_scans, args.tr, args.drift,
                           args.dt_frac, args.drop)
    path = os.path.join(args.out, "design.txt")
    atomic_write(path, dsg.format_design(dm).encode("utf-8"))
    log.info("wrote %s (%d x %d)", path, dm.n_scans, dm.n_columns)
    return 0


def cmd_diagnose(args):
    written = report.diagnose_command(
        args.image, args.out, drop=args.drop, scale=args.scale,
        events_paths=args.events, tr_s=args.tr, drift_order=args.drift,
        mask_fraction=args.mask_fraction)
    for path in written:
        log.info("wrote %s", path)
    return 0


def cmd_smooth(args):
    img = load_image(args.image)
    out = args.output
    if out is None:
        base = os.path.basename(args.image)
        stem = base[:-4] if base.endswith(".nii") else base
        os.makedirs(args.out, exist_ok=True)
        out = os.path.join(args.out, f"{stem}_smooth.nii")
    save_image(gaussian_smooth(img, SmoothSpec(args.fwhm)), out)
    log.info("wrote %s", out)
    return 0


def cmd_glm(args):
    contrasts = [report.parse_contrast(text, i) for i, text in enumerate(args.contrast, 1)]
    config = report.RunConfig(
        image_path=args.image, events_paths=args.events, tr_s=args.tr,
        drift_order=args.drift, smooth_fwhm_mm=args.fwhm, contrasts=contrasts,
        alpha=args.alpha, mask_fraction=args.mask_fraction, out_dir=args.out,
        drop=args.drop, dt_frac=args.dt_frac, two_sided=not args.one_sided,
        correlation_maps=args.rmap)
    artifacts = report.glm_command(config)
    for key in sorted(artifacts):
        log.info("wrote %s", artifacts[key])
    return 0


def cmd_run(args):
    result = pipeline.run(args.file, args.target, use_hash=args.hash,
                          echo=not args.quiet)
    log.info("%d command(s) executed", result.n_commands)
    return 0


def cmd_report(args):
    path = report.write_report(args.out, args.eda, args.analysis)
    log.info("wrote %s", path)
    return 0


COMMANDS = {
    "info": cmd_info,
    "fetch": cmd_fetch,
    "validate": cmd_validate,
    "design": cmd_design,
    "diagnose": cmd_diagnose,
    "smooth": cmd_smooth,
    "glm": cmd_glm,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="voxelrun: %(message)s", stream=sys.stderr, force=True)
    np.seterr(all="ignore")
    try:
        return COMMANDS[args.command](args)
    except (VoxelrunError, OSError, ValueError) as err:
        log.error("%s: %s", type(err).__name__, err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
