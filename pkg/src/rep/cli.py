"""Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data or format errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import RepError
from .evaluation import Grids, SyntheticSpec, TrainSettings
from .evaluation import generate_synthetic, loo_cv, masking_experiment
from .completion import CompletionConfig, complete_tensor
from .predictor import fit_pipeline, forecast_course, forecast_gels, predict_course

logger = logging.getLogger("rep")



class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master 64-bit seed")
    g.add_argument("--rank", type=int, default=None, help="CP rank F")
    g.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="regularization weight (completion for `complete`, classifier otherwise)")
    g.add_argument("--rho", type=float, default=None, help="feedback importance")
    g.add_argument("--protocol", choices=("validation-record", "5-fold"),
                   default="validation-record")
    g.add_argument("--out", type=Path, default=None, help="output file or directory")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _solver_args(p):
    p.add_argument("--completion-lambda", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--eta0", type=float, default=0.5)
    p.add_argument("--no-standardize", action="store_true")


def build_parser():
    common = _common()
    parser = _Parser(prog="rep", description="Recursive drug-response prediction "
                     "from time-course expression tensors.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a planted synthetic cohort")
    p.add_argument("--patients", type=int, default=30)
    p.add_argument("--genes", type=int, default=50)
    p.add_argument("--times", type=int, default=7)
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--missing", type=float, default=0.0)
    p.add_argument("--persistence", type=float, default=0.8)
    p.add_argument("--feedback-weight", type=float, default=1.0)

    p = sub.add_parser("complete", parents=[common], help="complete a tensor")
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("train", parents=[common], help="complete and train a REP model")
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--l1-radius", type=float, default=None)
    _solver_args(p)

    p = sub.add_parser("predict", parents=[common], help="per-time predictions for new patients")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--labels", type=Path, default=None, help="true past labels, if known")

    p = sub.add_parser("forecast", parents=[common], help="forecast courses from first profiles")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--gels", type=Path, default=None, help="also write forecast profiles here")

    for name, help_ in (("cv", "leave-one-patient-out cross-validation"),
                        ("mask-sweep", "accuracy versus fraction of hidden entries")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--tensor", type=Path, required=True)
        p.add_argument("--labels", type=Path, required=True)
        p.add_argument("--methods", default="rep,svm,knn")
        p.add_argument("--ranks", type=_ints, default=None)
        p.add_argument("--lambdas", type=_floats, default=None)
        p.add_argument("--rhos", type=_floats, default=None)
        _solver_args(p)
        if name == "mask-sweep":
            p.add_argument("--rates", type=_floats, default=(0.05, 0.10, 0.15, 0.20))
            p.add_argument("--n-seeds", type=int, default=1,
                           help="run seeds --seed .. --seed + n - 1")
    return parser


def _out(args, default):
    return args.out if args.out is not None else Path(default)


def _settings(args):
    return TrainSettings(epochs=args.epochs, eta0=args.eta0,
                         standardize=not args.no_standardize,
                         completion_lambda=args.completion_lambda)


def cmd_synth(args):
    spec = SyntheticSpec(I=args.patients, J=args.genes, K=args.times, F=args.rank or 3,
                         noise_std=args.noise, missing_rate=args.missing,
                         persistence=args.persistence, feedback_weight=args.feedback_weight,
                         seed=args.seed)
    cohort = generate_synthetic(spec)
    out = _out(args, "synth")
    out.mkdir(parents=True, exist_ok=True)
    axes = io.AxisLabels(cohort.labels.patient_ids,
                         tuple(f"G{j + 1:03d}" for j in range(spec.J)),
                         tuple(range(1, spec.K + 1)))
    io.save_tensor(out / "tensor.csv", cohort.tensor, axes)
    io.save_labels(out / "labels.csv", cohort.labels, axes.times)
    io.save_model(out / "truth.json", cohort.truth, axes)
    print(f"wrote {out}/tensor.csv, labels.csv, truth.json")


def cmd_complete(args):
    x, axes = io.load_tensor(args.tensor)
    cfg = CompletionConfig(rank=args.rank or 3, lam=1e-3 if args.lam is None else args.lam,
                           max_iters=args.max_iters, rel_tol=args.tol, seed=args.seed)
    res = complete_tensor(x, cfg)
    out = _out(args, "completion")
    out.mkdir(parents=True, exist_ok=True)
    io.save_tensor(out / "completed.csv", x, axes, all_entries=res.completed)
    io.save_model(out / "cp_model.json", res.model, axes)
    print(f"iterations={res.iterations} converged={res.converged} "
          f"objective={res.objective_trace[-1]:.6g}")


def cmd_train(args):
    x, axes = io.load_tensor(args.tensor)
    y = io.load_labels(args.labels, axes.patients, axes.times)
    model, report, comp = fit_pipeline(
        x, y, rank=args.rank or 3, completion_lambda=args.completion_lambda, seed=args.seed,
        rho=1.0 if args.rho is None else args.rho, lam=0.1 if args.lam is None else args.lam,
        l1_radius=args.l1_radius, epochs=args.epochs, eta0=args.eta0,
        standardize=not args.no_standardize,
    )
    out = _out(args, "model.json")
    io.save_model(out, model, axes)
    print(f"final objective={report.final_objective:.6g}; model written to {out}")


def _write_course(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "time_index", "label", "score", "feedback"])
        w.writerows(rows)


def _load_for_model(args):
    model, axes = io.load_model(args.model, with_axes=True)
    if axes is None or not hasattr(model, "u"):
        raise RepError(f"{args.model} is not a REP model file with axis labels")
    x, new_axes = io.load_tensor(args.tensor, genes=axes.genes, times=axes.times)
    return model, axes, x, new_axes


def cmd_predict(args):
    model, axes, x, new_axes = _load_for_model(args)
    if args.labels is None:
        logger.warning("no past labels given; feeding back predicted labels (forecast-mode feedback)")
        past = np.full((x.shape[0], x.shape[2]), np.nan)
        mode = "predicted"
    else:
        past = io.partial_labels(args.labels, new_axes.patients, axes.times)
        mode = "observed"
    rows = []
    for i, pid in enumerate(new_axes.patients):
        course = predict_course(model, x.values[i], x.mask[i], past_labels=past[i])
        rows += [[pid, t, lab, repr(score), mode] for t, (lab, score) in zip(axes.times, course)]
    out = _out(args, "predictions.csv")
    _write_course(out, rows)
    print(f"wrote {len(rows)} predictions to {out}")


def cmd_forecast(args):
    model, axes, x, new_axes = _load_for_model(args)
    if x.mask[:, :, 1:].any():
        logger.warning("ignoring records after the first time point")
    rows, gel_rows = [], []
    for i, pid in enumerate(new_axes.patients):
        x1, m1 = x.values[i, :, 0], x.mask[i, :, 0]
        course = forecast_course(model, x1, m1)
        rows += [[pid, t, lab, repr(score), "predicted"]
                 for t, (lab, score) in zip(axes.times, course)]
        if args.gels is not None:
            gels = forecast_gels(x1, m1, model.B, model.C, model.latent_ridge)
            gel_rows += [[pid, g, t, repr(float(gels[j, k]))]
                         for j, g in enumerate(axes.genes) for k, t in enumerate(axes.times)]
    out = _out(args, "forecast.csv")
    _write_course(out, rows)
    if args.gels is not None:
        with open(args.gels, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(io.TENSOR_COLUMNS)
            w.writerows(gel_rows)
    print(f"wrote {len(rows)} forecast predictions to {out}")


def _grids(args):
    d = Grids()
    return Grids(
        rank=args.ranks or ((args.rank,) if args.rank else d.rank),
        lam=args.lambdas or ((args.lam,) if args.lam is not None else d.lam),
        rho=args.rhos or ((args.rho,) if args.rho is not None else d.rho),
        svm_lam=d.svm_lam,
        knn_k=d.knn_k,
    )


def _methods(args):
    return tuple(m.strip() for m in args.methods.split(",") if m.strip())


def cmd_cv(args):
    x, axes = io.load_tensor(args.tensor)
    y = io.load_labels(args.labels, axes.patients, axes.times)
    report = loo_cv(x, y, _grids(args), args.protocol, methods=_methods(args),
                    seed=args.seed, settings=_settings(args))
    out = _out(args, "cv")
    io.emit_report(report, out)
    for name, mr in report.methods.items():
        print(f"{name}: ACC={mr.acc:.4f} AUC={mr.auc:.4f}")


def cmd_mask_sweep(args):
    x, axes = io.load_tensor(args.tensor)
    y = io.load_labels(args.labels, axes.patients, axes.times)
    seeds = range(args.seed, args.seed + args.n_seeds)
    rows = masking_experiment(x, y, args.rates, seeds, grids=_grids(args),
                              protocol=args.protocol, methods=_methods(args),
                              settings=_settings(args))
    out = _out(args, "mask_sweep")
    io.emit_report(rows, out)
    for r in rows:
        print(f"seed={r.seed} rate={r.rate:.2f} {r.method}: ACC={r.acc:.4f} AUC={r.auc:.4f}")


COMMANDS = {
    "synth": cmd_synth, "complete": cmd_complete, "train": cmd_train, "predict": cmd_predict,
    "forecast": cmd_forecast, "cv": cmd_cv, "mask-sweep": cmd_mask_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (RepError, OSError) as exc:
        print(f"rep: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
