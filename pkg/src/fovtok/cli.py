"""Command-line entry point.

Exit codes: 0 success, 1 check failed, 2 usage or input error. Human-readable
tables go to stdout; machine-readable reports are JSON files written via
``--report``. The FOVTOK_THREADS environment variable caps ``eval``
concurrency (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import costmodel, evaluate, nano, pattern as pat, pnm, tokenfile
from .tokenizer import detokenize, tokenize


def _load_pattern(path) -> pat.FoveationPattern:
    with open(path, "r", encoding="utf-8") as f:
        return pat.parse_pattern(f.read())


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def cmd_pattern(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        return _fail(str(e))
    if args.action == "validate":
        try:
            pat.parse_pattern(text)
        except pat.PatternError as e:
            print(f"invalid: {e}", file=sys.stderr)
            return 2
        print("ok")
        return 0
    try:
        pattern = pat.parse_pattern(text)
    except pat.PatternError as e:
        return _fail(str(e))
    counts = pat.kept_counts(pattern)
    print(f"patch size: {pattern.patch_size}")
    for i, (lvl, kept) in enumerate(zip(pattern.levels, counts)):
        print(f"level {i}: stride {lvl.stride}, grid {lvl.grid}, kept {kept}")
    print(
        f"tokens: {pat.token_count(pattern)}, side: {pat.pattern_size(pattern)}, "
        f"pixels: {pat.pixel_count(pattern)}"
    )
    extents = ", ".join(f"{e:g}" for e in pat.half_extents(pattern))
    print(f"stride breakpoints (px from center): {extents}")
    return 0


def cmd_tokenize(args) -> int:
    pattern = _load_pattern(args.config)
    image = pnm.read_pnm(args.image)
    tokens = tokenize(image, (args.x, args.y), pattern)
    tokenfile.write_tokens(tokens, args.out)
    print(f"wrote {args.out}: {tokens.token_count} tokens, {int(tokens.valid.sum())} valid")
    return 0


def cmd_render(args) -> int:
    pattern = _load_pattern(args.config)
    tokens = tokenfile.read_tokens(args.tokens, pattern)
    image = detokenize(tokens, mode=args.mode)
    pnm.write_pnm(image, args.out)
    print(f"wrote {args.out}: {image.width}x{image.height}")
    return 0


def cmd_flops(args) -> int:
    breakdown = costmodel.model_flops(args.preset)
    print(f"preset: {breakdown.name}")
    print(f"{'stage':24s} {'GFLOPs':>12s}")
    for stage, count in breakdown.stages.items():
        print(f"{stage:24s} {count / 1e9:12.2f}")
    print(f"{'total':24s} {breakdown.total / 1e9:12.2f}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            json.dump(breakdown.to_dict(), f, indent=2)
            f.write("\n")
    return 0


def _eval_model(spec: str, pattern: pat.FoveationPattern):
    if spec == "oracle":
        return evaluate.OracleModel()
    model = nano.load_checkpoint(spec)
    if model.cfg.pattern != pattern:
        raise ValueError("checkpoint pattern differs from --config pattern")

    class _Wrapped:
        def predict(self, tokens, target):
            out = model.predict(tokens)
            return out.probability_masks(), [float(v) for v in out.iou_pred]

    return _Wrapped()


def cmd_eval(args) -> int:
    pattern = _load_pattern(args.config)
    model = _eval_model(args.model, pattern)
    workers = int(os.environ.get("FOVTOK_THREADS", "1"))
    report = evaluate.evaluate_dataset(
        args.manifest,
        pattern,
        model,
        threshold=args.threshold,
        sigma=args.sigma,
        seed=args.seed,
        max_workers=max(1, workers),
    )
    for line in report.errors:
        print(f"error: {line}", file=sys.stderr)
    print(
        f"records: {len(report.records)}, skipped empty: {report.skipped_empty}, "
        f"failed: {len(report.errors)}"
    )
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            f.write(report.to_json())
    if args.curves:
        report.write_curves_csv(args.curves)
    if not report.records:
        print("error: no records evaluated", file=sys.stderr)
        return 2
    print(f"mIoU: {report.miou:.4f}")
    return 0


def cmd_nano(args) -> int:
    if args.check == "gradcheck":
        err = nano.grad_check(seed=args.seed)
        ok = err < 1e-4
        print(f"max rel err {err:.1e} {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1
    if args.check == "invariance":
        ok, passed = nano.invariance_check(seed=args.seed, trials=args.trials)
        print(f"byte-equal trials {passed}/{args.trials} {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1
    if args.check == "overfit":
        decreases, losses = nano.overfit_check(steps=args.steps, seed=args.seed)
        ok = decreases >= int(0.95 * args.steps)
        print(
            f"loss {losses[0]:.4f} -> {losses[-1]:.4f}, "
            f"decreasing steps {decreases}/{args.steps} {'PASS' if ok else 'FAIL'}"
        )
        return 0 if ok else 1
    if args.check == "init":
        pattern = _load_pattern(args.config)
        cfg = nano.NanoConfig(
            pattern=pattern,
            channels=args.channels,
            d_model=args.d_model,
            n_layers=args.layers,
            n_heads=args.heads,
            n_masks=args.masks,
            decoder_dim=args.decoder_dim,
            seed=args.seed,
        )
        model = nano.NanoModel(cfg)
        nano.save_checkpoint(model, args.out)
        n_params = sum(p.numel() for p in model.parameters())
        print(f"wrote {args.out}: {n_params} parameters")
        return 0
    raise AssertionError(f"unhandled check {args.check}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fovtok", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pattern", help="inspect or validate a pattern config")
    p.add_argument("action", choices=["info", "validate"])
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("tokenize", help="foveate an image around a prompt")
    p.add_argument("--image", required=True)
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--y", type=int, required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("render", help="reconstruct an image from a token file")
    p.add_argument("--tokens", required=True)
    p.add_argument("--config", required=True, help="pattern config the tokens were made with")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["nearest", "bilinear"], default="nearest")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("flops", help="per-stage FLOPs for a model preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("eval", help="single-point prompted evaluation over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, help="checkpoint path, or 'oracle'")
    p.add_argument("--sigma", type=float, default=0.0, help="prompt noise std in pixels")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.add_argument("--curves", default=None, help="write binned curves as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("nano", help="miniature-model checks and checkpoints")
    p.add_argument("check", choices=["gradcheck", "overfit", "invariance", "init"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--config", default=None, help="pattern config (init)")
    p.add_argument("--out", default=None, help="checkpoint path (init)")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--masks", type=int, default=3)
    p.add_argument("--decoder-dim", type=int, default=32)
    p.set_defaults(func=cmd_nano)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command == "nano" and args.check == "init" and not (args.config and args.out):
        return _fail("nano init requires --config and --out")
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
