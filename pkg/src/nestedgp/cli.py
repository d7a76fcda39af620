"""Command-line interface: ``nestedgp {train,predict,synth,modelcheck}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
The output directory may be overridden with ``$NESTEDGP_OUTPUT_DIR``.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .diagnostics import galactic_convert, hpd_table, summarize
from .io import (
    DatasetError,
    RunConfig,
    config_to_text,
    parse_bounds,
    read_config,
    read_dataset,
    write_dataset,
)
from .linalg import NotPositiveDefinite
from .prediction import AugmentedData, ModalSnapshot, model_check_slice, predict_from_modal, predict_joint
from .sampler import Target, merge_reports, run_chain, run_chains
from .synth import synthesize

log = logging.getLogger("nestedgp")

OUTPUT_ENV = "NESTEDGP_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _floats(text):
    return [float(x) for x in text.split(",")] if text else None


def _out_dir(args, rc):
    out = os.environ.get(OUTPUT_ENV) or args.out or rc.output_dir or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args):
    rc = read_config(args.config) if getattr(args, "config", None) else RunConfig()
    sc = rc.sampler
    if getattr(args, "model", None):
        sc = replace(sc, model=args.model)
    if getattr(args, "t0", None) is not None:
        sc = replace(sc, t0=args.t0)
    if getattr(args, "iters", None) is not None:
        sc = replace(sc, n_iter=args.iters)
    if getattr(args, "seed", None) is not None:
        sc = replace(sc, seed=args.seed)
    if getattr(args, "burnin", None) is not None:
        sc = replace(sc, burnin_frac=args.burnin)
    if getattr(args, "bounds", None):
        sc = replace(sc, priors=replace(sc.priors, s_bounds=parse_bounds(args.bounds)))
    rc.sampler = sc
    if getattr(args, "strategies", None):
        rc.strategies = [s.strip() for s in args.strategies.split(",")]
    if getattr(args, "chains", None) is not None:
        rc.chains = args.chains
    return rc


def _stamp(rc):
    return f"# seed={rc.sampler.seed} config_sha256={rc.sampler.digest()}\n"


def _prepend(path, line):
    text = Path(path).read_text()
    Path(path).write_text(line + text)


def _write_summary(out, name, summary, rc, label):
    csv_path = out / f"{name}.csv"
    summary.to_csv(csv_path)
    _prepend(csv_path, _stamp(rc))
    table = hpd_table({label: summary})
    acc = ", ".join(f"{k}={v:.3f}" for k, v in summary.acceptance.items())
    (out / f"{name}.txt").write_text(_stamp(rc) + table + f"\n\nacceptance: {acc}\n")


def cmd_train(args):
    rc = _load_config(args)
    ds = read_dataset(args.data)
    ds.require_design()
    target = Target(ds.data, ds.points, rc.strategies, jitter=rc.sampler.jitter)
    rc.sampler.validate(target.d, target.sigma_size)
    out = _out_dir(args, rc)
    (out / "config.ini").write_text(_stamp(rc) + config_to_text(rc))
    if rc.chains == 1:
        reports = [run_chain(target, rc.sampler)]
    else:
        reports = run_chains(target, rc.sampler, rc.chains)
    if len(reports) == 1:
        report = reports[0]
    else:
        for i, r in enumerate(reports):
            r.to_csv(out / f"trace_chain{i + 1}.csv")
        report = merge_reports(reports)
    report.to_csv(out / "trace.csv")
    if len(reports) == 1 and rc.sampler.model == "nested":
        _write_lookback(out / "lookback.csv", report.final_state, rc)
    summary = summarize(report, rc.sampler.burnin_frac)
    _write_summary(out, "summary", summary, rc, f"{rc.sampler.model}, training data")
    log.info("wrote %s", out)
    return 0


def _write_lookback(path, state, rc):
    with open(path, "w") as fh:
        fh.write(_stamp(rc))
        fh.write("lag," + ",".join(f"ell_{c + 1}" for c in range(len(state.lookbacks))) + "\n")
        vals = [b.values() for b in state.lookbacks]
        for i in range(len(vals[0])):
            fh.write(f"{i + 1}," + ",".join(repr(float(v[i])) for v in vals) + "\n")


def cmd_predict(args):
    rc = _load_config(args)
    if rc.sampler.priors.s_bounds is None:
        raise UsageError("prior bounds for s_test are required (--bounds lo:hi,...)")
    train = read_dataset(args.data)
    train.require_design()
    test = read_dataset(args.test)
    if test.data.shape[:-1] != train.data.shape[:-1] or test.data.shape[-1] != 1:
        raise UsageError(
            f"test slice dims {test.data.shape} do not match training dims {train.data.shape}"
        )
    aug = AugmentedData(train.data, train.points, test.data, tuple(rc.strategies))
    out = _out_dir(args, rc)
    (out / "predict_config.ini").write_text(_stamp(rc) + config_to_text(rc))
    if args.scheme == "joint":
        report = predict_joint(aug, rc.sampler)
    else:
        if not args.summary:
            raise UsageError("--scheme modal needs --summary from a training run")
        from .diagnostics import PosteriorSummary

        snap = ModalSnapshot.from_summary(PosteriorSummary.from_csv(args.summary), args.summary_kind)
        report = predict_from_modal(aug, snap, rc.sampler)
    report.to_csv(out / f"prediction_{args.scheme}_trace.csv")
    summary = summarize(report, rc.sampler.burnin_frac)
    label = "sampling from joint" if args.scheme == "joint" else "sampling from posterior predictive"
    _write_summary(out, f"prediction_{args.scheme}_summary", summary, rc, label)
    if train.points.shape[1] == 2:
        s1, s2 = summary["s1_test"], summary["s2_test"]
        g = galactic_convert(s1.mode, s2.interval, s1.interval)
        lines = [
            _stamp(rc).rstrip("\n"),
            f"length_unit_kpc={float(g.length_unit_kpc)!r}",
            f"omega_bar_km_s_kpc={float(g.omega_bar)!r}",
            f"omega_bar_interval={[float(x) for x in g.omega_bar_interval]!r}",
            f"bar_angle_deg_interval={[float(x) for x in g.bar_angle_deg]!r}",
        ]
        (out / f"galactic_{args.scheme}.txt").write_text("\n".join(lines) + "\n")
    return 0


def _parse_dims(text):
    try:
        dims = tuple(int(x) for x in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"invalid dims {text!r}; expected e.g. 2x50x216") from None
    if len(dims) < 2 or any(m < 1 for m in dims):
        raise UsageError(f"invalid dims {text!r}")
    return dims


def cmd_synth(args):
    dims = _parse_dims(args.dims)
    q = _floats(args.q)
    if q is None or len(q) != args.d or any(x <= 0 for x in q):
        raise UsageError(f"--q needs {args.d} positive values")
    kwargs = {}
    if args.sigma1:
        kwargs["sigma1"] = tuple(_floats(args.sigma1))
    res = synthesize(
        dims, q, seed=args.seed, mean_scale=args.mean_scale,
        with_test=bool(args.test_out), s_test=_floats(args.s_test),
        discontinuity=None if args.discontinuity == "none" else args.discontinuity, **kwargs,
    )
    write_dataset(args.out, res.data, res.points, res.meta)
    if args.test_out:
        meta = dict(res.meta, d=args.d, role="test")
        write_dataset(args.test_out, res.test_slice, None, meta)
    return 0


def _parse_slices(text, n):
    lo, sep, hi = text.partition(":")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise UsageError(f"invalid slice range {text!r}") from None
    if b < a:
        raise UsageError(f"empty slice range {text!r}")
    if a < 1 or b > n:
        raise UsageError(f"slice range {text!r} outside 1..{n}")
    return list(range(a, b + 1))


def cmd_modelcheck(args):
    rc = _load_config(args)
    ds = read_dataset(args.data)
    ds.require_design()
    slices = _parse_slices(args.slices, ds.data.shape[-1])
    from .diagnostics import PosteriorSummary

    snap = ModalSnapshot.from_summary(PosteriorSummary.from_csv(args.summary), args.summary_kind)
    out = _out_dir(args, rc)
    stamp = _stamp(rc)
    for s in slices:
        rep = model_check_slice(ds.data, ds.points, rc.strategies, s - 1, snap,
                                n_iter=args.iters or 20000, n_last=args.last,
                                seed=rc.sampler.seed + s)
        path = out / f"slice_{s}.csv"
        rep.to_csv(path)
        _prepend(path, stamp)
        rep.write_summary(out / f"slice_{s}_summary.txt")
        _prepend(out / f"slice_{s}_summary.txt", stamp)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="nestedgp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--iters", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--strategies", help="per-mode covariance strategy, e.g. direct,empirical,kernel")

    t = sub.add_parser("train", help="learn the GP parameters from training data")
    common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--model", choices=["nested", "nonnested"])
    t.add_argument("--t0", type=int)
    t.add_argument("--chains", type=int)
    t.add_argument("--burnin", type=float)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="infer the design point of a test slice")
    common(pr)
    pr.add_argument("--data", required=True)
    pr.add_argument("--test", required=True, help="dataset file holding the test slice")
    pr.add_argument("--scheme", choices=["joint", "modal"], default="joint")
    pr.add_argument("--bounds", help="uniform prior bounds, e.g. 1.7:2.3,0:1.5708")
    pr.add_argument("--summary", help="training summary CSV (modal scheme)")
    pr.add_argument("--summary-kind", choices=["mode", "mean"], default="mode")
    pr.add_argument("--model", choices=["nested", "nonnested"])
    pr.add_argument("--burnin", type=float)
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--dims", required=True, help="e.g. 2x50x216")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--q", required=True, help="comma-separated inverse length scales")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--test-out", help="also write a held-out test slice here")
    s.add_argument("--s-test", help="design point of the test slice")
    s.add_argument("--sigma1", help="sigma11,sigma22,rho")
    s.add_argument("--mean-scale", type=float, default=2.0)
    s.add_argument("--discontinuity", choices=["none", "two-regime"], default="none")
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("modelcheck", help="re-predict held-out slices from a trained summary")
    common(m)
    m.add_argument("--data", required=True)
    m.add_argument("--summary", required=True)
    m.add_argument("--summary-kind", choices=["mode", "mean"], default="mode")
    m.add_argument("--slices", required=True, help="1-based slice or inclusive range a:b")
    m.add_argument("--last", type=int, default=1000)
    m.set_defaults(func=cmd_modelcheck)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, DatasetError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, NotPositiveDefinite) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        dump = Path(os.environ.get(OUTPUT_ENV) or getattr(args, "out", None) or ".") / "failure_dump.json"
        try:
            dump.parent.mkdir(parents=True, exist_ok=True)
            dump.write_text(json.dumps({"command": args.command, "error": str(exc)}, indent=2))
        except OSError:
            pass
        return 2


if __name__ == "__main__":
    sys.exit(main())
