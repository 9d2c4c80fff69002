"""Batch front end: ``kronpol {simulate,classify,decompose} MANIFEST [options]``.

Manifests are JSON objects. Relative paths inside a manifest are resolved
against the manifest's directory. Command-line options override manifest
fields of the same name.

Exit codes: 0 success, 2 invalid manifest or arguments, 3 file errors,
4 numerical failure rate above ``max_failure_rate``.
"""
import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import imaging
from .kronml import FlipFlopConfig
from .mos import MosRule
from .reference import reference_accuracy, reference_kappa
from .simulate import (CLASS_LABELS, ESTIMATORS, Scenario, confusion_experiments,
                       nrmse_experiment)
from .symmetry import Symmetry

log = logging.getLogger("kronpol")

EXIT_OK = 0
EXIT_MANIFEST = 2
EXIT_IO = 3
EXIT_FAILURES = 4


class ManifestError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"manifest field {field!r}: {message}")
        self.field = field


class FailureRateExceeded(RuntimeError):
    pass


# -- manifest helpers -------------------------------------------------------

def load_manifest(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read manifest {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError("<root>", f"invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ManifestError("<root>", "must be a JSON object")
    return data, path.resolve().parent


def _field(data, key, kind, default=None, required=False, prefix=""):
    name = prefix + key
    if key not in data or data[key] is None:
        if required:
            raise ManifestError(name, "is required")
        return default
    value = data[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ManifestError(name, f"expected an integer, got {value!r}")
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ManifestError(name, f"expected a number, got {value!r}")
    if kind in (str, list, dict, bool) and not isinstance(value, kind):
        raise ManifestError(name, f"expected {kind.__name__}, got {value!r}")
    return value


def _as_list(value):
    return value if isinstance(value, list) else [value]


def parse_rule(text, gic_delta=None, field="rule"):
    """``aic``, ``bic``, ``hqc``, ``gic`` or ``gicN`` (GIC with delta N)."""
    text = str(text).lower()
    try:
        if text.startswith("gic") and text != "gic":
            return MosRule("gic", int(text[3:]))
        return MosRule(text, gic_delta if text == "gic" else None)
    except ValueError as exc:
        raise ManifestError(field, str(exc)) from None


def parse_window(text, field="window"):
    try:
        return imaging._parse_window(text)
    except (ValueError, TypeError) as exc:
        raise ManifestError(field, str(exc)) from None


def _config(data, iters):
    iters = iters if iters is not None else _field(data, "iters", int, 5)
    if iters < 1:
        raise ManifestError("iters", "must be >= 1")
    return FlipFlopConfig(max_iterations=iters)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "nan" if np.isnan(x) else f"{float(x):.10g}"
    return str(x)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    Path(path).write_text(buf.getvalue())


def _output_dir(data, base, override):
    out = Path(override) if override else base / _field(data, "output_dir", str, "output")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- simulate ---------------------------------------------------------------

def _experiment_grid(exp, i):
    prefix = f"experiments[{i}]."
    kind = _field(exp, "kind", str, required=True, prefix=prefix)
    if kind not in ("confusion", "nrmse"):
        raise ManifestError(prefix + "kind", f"expected 'confusion' or 'nrmse', got {kind!r}")
    passes = _as_list(_field(exp, "passes", object, required=True, prefix=prefix))
    looks = _as_list(_field(exp, "looks", object, required=True, prefix=prefix))
    rhos = _as_list(exp.get("rho"))
    for name, values in (("passes", passes), ("looks", looks)):
        if not values or any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in values):
            raise ManifestError(prefix + name, "expected positive integers")
    for r in rhos:
        if r is not None and (isinstance(r, bool) or not isinstance(r, (int, float)) or not abs(r) < 1):
            raise ManifestError(prefix + "rho", "expected null or a number with |rho| < 1")
    estimators = _as_list(_field(exp, "estimators", object, ["flipflop"], prefix=prefix))
    for e in estimators:
        if e not in ESTIMATORS:
            raise ManifestError(prefix + "estimators", f"unknown estimator {e!r}")
    return kind, passes, looks, rhos, estimators


def cmd_simulate(args):
    data, base = load_manifest(args.manifest)
    seed = args.seed if args.seed is not None else _field(data, "seed", int, required=True)
    trials = args.trials if args.trials is not None else _field(data, "trials", int, 10_000)
    if trials < 1:
        raise ManifestError("trials", "must be >= 1")
    threads = args.threads or _field(data, "threads", int, 1)
    config = _config(data, args.iters)
    max_fail = _field(data, "max_failure_rate", float, 1.0)
    gic_delta = args.gic_delta if args.gic_delta is not None else _field(data, "gic_delta", int)
    experiments = _field(data, "experiments", list, required=True)
    if not experiments:
        raise ManifestError("experiments", "is empty")

    results, blocks, summary = [], [], []
    worst = 0.0
    for i, exp in enumerate(experiments):
        if not isinstance(exp, dict):
            raise ManifestError(f"experiments[{i}]", "expected an object")
        prefix = f"experiments[{i}]."
        name = _field(exp, "name", str, f"exp{i}", prefix=prefix)
        kind, passes, looks, rhos, estimators = _experiment_grid(exp, i)
        if kind == "confusion":
            rules = [args.rule] if args.rule else _as_list(_field(exp, "rules", object, ["bic"],
                                                                  prefix=prefix))
            rules = [parse_rule(r, gic_delta, prefix + "rules") for r in rules]
        else:
            syms = _as_list(_field(exp, "symmetries", object, list(CLASS_LABELS), prefix=prefix))
            try:
                syms = [Symmetry.parse(s) for s in syms]
            except ValueError as exc:
                raise ManifestError(prefix + "symmetries", str(exc)) from None
            scale = _field(exp, "scale", str, "trace", prefix=prefix)
            if scale not in ("trace", "gauge"):
                raise ManifestError(prefix + "scale", "expected 'trace' or 'gauge'")

        for rho in rhos:
            for M in passes:
                for K in looks:
                    sc = Scenario(M, K, rho, trials=trials, seed=seed, config=config)
                    tag = [name, M, K, "identity" if rho is None else rho]
                    if kind == "confusion":
                        for est in estimators:
                            cms = confusion_experiments(sc, rules, est, workers=threads)
                            for rule, cm in cms.items():
                                worst = max(worst, cm.failures.sum() / (4 * trials))
                                _confusion_rows(results, blocks, summary, tag, est, rule, cm,
                                                M, K, rho)
                    else:
                        for h in syms:
                            rep = nrmse_experiment(sc, h, estimators, scale=scale, workers=threads)
                            for est in estimators:
                                worst = max(worst, rep.failures[est] / trials)
                                results.append(tag + [est, "", "nrmse", h.label, rep.values[est]])
                                results.append(tag + [est, "", "failures", h.label,
                                                      rep.failures[est]])

    out = _output_dir(data, base, args.output_dir)
    _write_csv(out / "results.csv",
               ["experiment", "M", "K", "rho", "estimator", "rule", "metric", "class", "value"],
               results)
    if blocks:
        (out / "confusion.csv").write_text("".join(blocks))
    text = "\n".join(summary) + ("\n" if summary else "")
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)
    _check_failures(worst, max_fail)
    return EXIT_OK


def _confusion_rows(results, blocks, summary, tag, est, rule, cm, M, K, rho):
    acc = cm.accuracy
    try:
        kappa = cm.kappa
    except ValueError:
        kappa = float("nan")
    for label, a, f in zip(CLASS_LABELS, acc, cm.failures):
        results.append(tag + [est, str(rule), "accuracy", label, a])
        results.append(tag + [est, str(rule), "failures", label, int(f)])
    results.append(tag + [est, str(rule), "kappa", "", kappa])

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"# {tag[0]} M={M} K={K} rho={tag[3]} estimator={est} rule={rule}"])
    w.writerow(["true\\selected"] + list(CLASS_LABELS))
    for label, row in zip(CLASS_LABELS, cm.counts):
        w.writerow([label] + [int(v) for v in row])
    buf.write("\n")
    blocks.append(buf.getvalue())

    head = f"{tag[0]} M={M} K={K} rho={tag[3]} {est} {rule}:"
    line = f"{head} accuracy " + " ".join(f"{a:.1f}" for a in acc) + f" kappa {kappa:.3f}"
    ref_acc = reference_accuracy(M, K, rho, rule, est)
    if ref_acc is not None:
        line += " | published " + " ".join(f"{r:.1f}" for r in ref_acc)
        line += " delta " + " ".join(f"{a - r:+.1f}" for a, r in zip(acc, ref_acc))
    ref_k = reference_kappa(M, K, rho, rule, est)
    if ref_k is not None:
        line += f" | published kappa {ref_k:.2f} delta {kappa - ref_k:+.3f}"
    summary.append(line)


def _check_failures(rate, threshold):
    if rate > threshold:
        raise FailureRateExceeded(
            f"numerical failure rate {rate:.4f} exceeds max_failure_rate {threshold}")
    if rate > 0:
        log.warning("numerical failure rate %.4f", rate)


# -- image commands ---------------------------------------------------------

def _image_setup(args):
    data, base = load_manifest(args.manifest)
    stack_spec = _field(data, "stack", dict, required=True)
    header = _field(stack_spec, "header", str, required=True, prefix="stack.")
    payload = _field(stack_spec, "payload", str, required=True, prefix="stack.")
    gic_delta = args.gic_delta if args.gic_delta is not None else _field(data, "gic_delta", int)
    rule = parse_rule(args.rule or _field(data, "rule", str, "bic"), gic_delta)
    window = parse_window(args.window or _field(data, "window", str, "5x5"))
    single = args.single_image or _field(data, "single_image", bool, False)
    opts = dict(
        rule=rule,
        window=window,
        config=_config(data, args.iters),
        single_image=single,
        workers=args.threads or _field(data, "threads", int, 1),
    )
    regions = _field(data, "regions", dict, {})
    max_fail = _field(data, "max_failure_rate", float, 1.0)

    stack = imaging.load_stack(base / header, base / payload)
    L, C = stack.shape
    for name, bounds in regions.items():
        ok = (isinstance(bounds, list) and len(bounds) == 4
              and all(isinstance(b, int) and not isinstance(b, bool) for b in bounds))
        if not ok or not (0 <= bounds[0] < bounds[1] <= L and 0 <= bounds[2] < bounds[3] <= C):
            raise ManifestError(f"regions.{name}",
                                f"expected [row0, row1, col0, col1] inside a {L}x{C} image")
    out = _output_dir(data, base, args.output_dir)
    return data, stack, opts, regions, max_fail, out


def _summary_json(path, stack, opts, failures, extra=None):
    L, C = stack.shape
    info = {
        "rows": L,
        "cols": C,
        "passes": stack.n_passes,
        "single_image": opts["single_image"],
        "window": "x".join(map(str, opts["window"])),
        "rule": str(opts["rule"]),
        "pixels": L * C,
        "failures": failures,
        "failure_rate": failures / (L * C),
    }
    info.update(extra or {})
    Path(path).write_text(json.dumps(info, indent=2) + "\n")
    return info


def _region_csv(path, labels, regions, classes, names):
    rows = []
    for name, (pct, n) in imaging.region_percentages(labels, regions, classes).items():
        rows.append([name, n] + list(pct))
    _write_csv(path, ["region", "pixels"] + names, rows)


def cmd_classify(args):
    data, stack, opts, regions, max_fail, out = _image_setup(args)
    cmap = imaging.classify_map(stack, **opts)
    imaging.save_png(imaging.render_map(cmap.labels), out / "class_map.png")
    np.save(out / "labels.npy", cmap.labels)
    info = _summary_json(out / "summary.json", stack, opts, cmap.failures)
    if regions:
        _region_csv(out / "regions.csv", cmap.labels, regions, [int(h) for h in Symmetry],
                    list(CLASS_LABELS))
    if cmap.failures == info["pixels"]:
        log.warning("no pixel could be classified")
    print(f"classified {info['pixels']} pixels, {cmap.failures} failures -> {out}")
    _check_failures(info["failure_rate"], max_fail)
    return EXIT_OK


def cmd_decompose(args):
    data, stack, opts, regions, max_fail, out = _image_setup(args)
    estimate = _field(data, "estimate", str, "structured")
    if estimate not in ("structured", "sample"):
        raise ManifestError("estimate", "expected 'structured' or 'sample'")
    maps = imaging.decompose_map(stack, estimate=estimate, **opts)
    imaging.save_png(imaging.render_zones(maps.zones), out / "zones.png")
    imaging.save_png(imaging.render_map(maps.labels), out / "class_map.png")
    np.save(out / "zones.npy", maps.zones)
    np.save(out / "entropy.npy", maps.entropy)
    np.save(out / "alpha.npy", maps.alpha)
    np.save(out / "labels.npy", maps.labels)
    info = _summary_json(out / "summary.json", stack, opts, maps.failures,
                         {"estimate": estimate})
    if regions:
        _region_csv(out / "zone_regions.csv", maps.zones, regions, list(range(1, 10)),
                    [f"Z{z}" for z in range(1, 10)])
    if maps.failures == info["pixels"]:
        log.warning("no pixel could be decomposed; all outputs are sentinels")
    print(f"decomposed {info['pixels']} pixels, {maps.failures} failures -> {out}")
    _check_failures(info["failure_rate"], max_fail)
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="kronpol",
        description="Kronecker-structured symmetry classification of multipass PolSAR data.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress information")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("manifest", help="JSON manifest file")
        p.add_argument("--rule", choices=["aic", "bic", "gic", "hqc"],
                       help="information criterion (overrides the manifest)")
        p.add_argument("--gic-delta", type=int, help="GIC penalty is delta + 1 (integer >= 2)")
        p.add_argument("--iters", type=int, help="flip-flop sweeps (default 5)")
        p.add_argument("--threads", type=int, help="maximum worker threads")
        p.add_argument("--output-dir", help="output directory (overrides the manifest)")

    p = sub.add_parser("simulate", help="Monte Carlo confusion tables and NRMSE curves")
    common(p)
    p.add_argument("--seed", type=int, help="base seed of the counter-based generators")
    p.add_argument("--trials", type=int, help="trials per class and scenario")
    p.set_defaults(func=cmd_simulate)

    for name, func, text in (("classify", cmd_classify, "per-pixel symmetry class map"),
                             ("decompose", cmd_decompose, "H / alpha zone maps")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--window", help="window size W1xW2 (default 5x5)")
        p.add_argument("--single-image", action="store_true",
                       help="use only the first pass with the single-image classifier")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except imaging.StackFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FailureRateExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
