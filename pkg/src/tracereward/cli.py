"""Command-line entry point: one binary, one subcommand per stage.

Exit codes: 0 success, 1 a check or validation failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import cleaning, groups, prompts, reports, reward, rm, theory, toy_rm
from .errors import (
    ArgumentError,
    ConfigError,
    DomainError,
    FixtureMissingError,
    ParseError,
    SchemaError,
    TraceRewardError,
)
from .taxonomy import PERTURBATION_KINDS

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# ------------------------------------------------------------------ io

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _read_file_arg(value: str | None) -> str | None:
    """Arguments that name a file; a trailing newline is not part of the payload."""
    if value is None:
        return None
    text = _read_text(value)
    return text[:-1] if text.endswith("\n") else text


def _lines(path: str) -> list[str]:
    return [line for line in _read_text(path).splitlines() if line.strip()]


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _jsonl(objs) -> str:
    return "".join(json.dumps(o, sort_keys=True, ensure_ascii=False) + "\n" for o in objs)


def _read_numbers(path: str) -> list[float]:
    text = _read_text(path).strip()
    if not text:
        return []
    if text.startswith("["):
        return [float(v) for v in json.loads(text)]
    return [float(tok) for tok in text.replace(",", " ").split()]


def _emit(args, obj, table=None) -> None:
    """JSON of ``obj`` or, for csv/markdown, the given (header, rows) table."""
    if args.format == "json" or table is None:
        _write(args.out, _dump(obj))
    else:
        _write(args.out, reports.render_table(*table, args.format))


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


# --------------------------------------------------------------- clean

def _clean_record(line: str) -> tuple[str, str | None]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return line, None
    if isinstance(obj, str):
        return obj, None
    if isinstance(obj, dict) and isinstance(obj.get("text"), str):
        return obj["text"], obj.get("reference_action")
    return line, None


def cmd_clean(args) -> int:
    default_ref = _read_file_arg(args.reference_action)
    outputs, spans = [], []
    for i, line in enumerate(_read_text(args.inp).splitlines()):
        if not line.strip():
            continue
        text, ref = _clean_record(line)
        if args.domain == "code":
            result = cleaning.clean_code_reason(text, ref if ref is not None else default_ref)
        else:
            result = cleaning.clean_math_reason(text)
        outputs.append(result.text)
        spans.append({"record": i, "removed_spans": result.spans_as_dicts()})
    _write(args.out, _jsonl(outputs))
    if args.spans:
        _write(args.spans, _jsonl(spans))
    return EXIT_OK


# -------------------------------------------------------------- groups

def cmd_groups_validate(args) -> int:
    valid, errors = [], []
    lines = _read_text(args.inp).splitlines()
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = groups.parse_group_record(line, strict_kinds=not args.lenient_kinds)
        except (ParseError, SchemaError) as exc:
            errors.append({"line": n, "error": str(exc), "field": getattr(exc, "field", None)})
            continue
        valid.append(groups.serialize_group_record(rec))
    _write(args.out, "".join(v + "\n" for v in valid))
    summary = {"records": len(valid) + len(errors), "valid": len(valid), "invalid": len(errors),
               "errors": errors}
    if args.report:
        _write(args.report, _dump(summary))
    _note(f"validated {summary['records']} records: {len(valid)} valid, {len(errors)} invalid")
    return EXIT_FAIL if errors else EXIT_OK


def cmd_groups_filter(args) -> int:
    config = groups.FilterConfig(min_tokens=args.min_tokens, min_negatives=args.min_negatives)
    kept, decisions = [], []
    for line in _lines(args.inp):
        rec = groups.parse_group_record(line, strict_kinds=False)
        d = groups.filter_group(rec, config)
        decisions.append({"problem_id": rec.problem_id, "decision": d.decision, "reasons": d.reasons})
        if d.keep:
            kept.append(groups.serialize_group_record(d.record))
    _write(args.out, "".join(k + "\n" for k in kept))
    if args.decisions:
        _write(args.decisions, _jsonl(decisions))
    _note(f"kept {len(kept)} of {len(decisions)} groups")
    return EXIT_OK


def cmd_groups_stats(args) -> int:
    records = [groups.parse_group_record(line) for line in _lines(args.inp)]
    seeds = len(records) if args.seeds is None else args.seeds
    stats = groups.dataset_statistics(records, seeds)
    _emit(args, stats.to_dict(), stats.table())
    if args.csv_dir:
        out = Path(args.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, table in (("dataset", stats.table()),
                            ("perturbations", stats.perturbation_table()),
                            ("dimensions", stats.dimension_table())):
            reports.emit_report(table, "csv", out / f"{name}.csv")
    return EXIT_OK


# ------------------------------------------------------------- prompts

def cmd_prompts_render_flaw(args) -> int:
    kind = PERTURBATION_KINDS.get(args.kind)
    if kind is None:
        raise ArgumentError(f"unknown perturbation kind {args.kind!r}")
    extras = None
    if kind.domain == "math":
        if args.action_gt is None:
            raise ArgumentError("math kinds need --action-gt")
        extras = prompts.MathExtras(_read_file_arg(args.action_gt), args.negative_kind, args.mutation_target)
    rendered = prompts.render_flaw_prompt(kind, _read_file_arg(args.raw_reason), extras)
    _write(args.out, _dump({**rendered.to_dict(), "hash": prompts.prompt_hash(rendered)}))
    return EXIT_OK


def cmd_prompts_render_rubric(args) -> int:
    rendered = prompts.render_rubric_prompt(args.domain, _read_file_arg(args.problem),
                                            _read_file_arg(args.reason), _read_file_arg(args.action_gt))
    _write(args.out, _dump({**rendered.to_dict(), "hash": prompts.prompt_hash(rendered)}))
    return EXIT_OK


def cmd_prompts_parse_judge(args) -> int:
    if args.store:
        if not args.prompt:
            raise ArgumentError("--store needs --prompt (a rendered prompt JSON file)")
        obj = json.loads(_read_text(args.prompt))
        text = prompts.StubBackend(args.store).annotate(prompts.RenderedPrompt(obj["system"], obj["user"]))
    else:
        text = _read_text(args.inp)
    resp = prompts.parse_rubric_response(text, args.domain)
    labels = resp.labels()
    out = {**resp.to_dict(), "lenient": resp.lenient, "class_labels": list(labels.class_labels),
           "normalized_total": labels.normalized_total}
    _write(args.out, _dump(out))
    return EXIT_OK


# ------------------------------------------------------------------ rm

def cmd_rm_score(args) -> int:
    model = toy_rm.ToyRM.load(args.model) if args.model else None
    results = []
    for line in _lines(args.inp):
        obj = json.loads(line)
        if "features" in obj:
            if model is None:
                raise ArgumentError("feature records need --model")
            out = model.forward(obj["features"])
        elif "dim_logits" in obj:
            out = rm.RMOutputs.from_logits(obj["dim_logits"], obj["total_logit"])
        elif "dim_probs" in obj:
            s_dim = rm.dim_score(obj["dim_probs"])
            s_total = float(1.0 / (1.0 + np.exp(-obj["total_logit"])))
            out = rm.RMOutputs(np.asarray(obj["dim_probs"], float), float(obj["total_logit"]),
                               s_dim, s_total, rm.combine_rm_score(s_dim, s_total))
        else:
            raise ArgumentError("each record needs features, dim_logits or dim_probs")
        results.append({"s_dim": out.s_dim, "s_total": out.s_total, "s_rm": out.s_rm})
    _write(args.out, _jsonl(results))
    return EXIT_OK


def cmd_rm_fit(args) -> int:
    train = toy_rm.synthetic_groups(args.train_groups, seed=args.seed)
    held = toy_rm.synthetic_groups(args.heldout_groups, seed=args.seed + 1)
    model = toy_rm.toy_rm_fit(train, toy_rm.ToyRMConfig(steps=args.steps, seed=args.seed,
                                                         learning_rate=args.lr))
    if args.save:
        model.save(args.save)
    result = {"steps": args.steps, "seed": args.seed,
              "final_loss": model.history[-1] if model.history else None,
              "train": toy_rm.evaluate(model, train).to_dict(),
              "heldout": toy_rm.evaluate(model, held).to_dict()}
    _write(args.out, _dump(result))
    return EXIT_OK


def cmd_rm_gradcheck(args) -> int:
    results = rm.gradcheck(points=args.points, seed=args.seed)
    table = (["Loss", "Points", "Max rel. error", "Pass"],
             [[r.loss, r.points, f"{r.max_rel_error:.3e}", r.passed] for r in results])
    _emit(args, [r.to_dict() for r in results], table)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# -------------------------------------------------------------- reward

def cmd_reward_compute(args) -> int:
    if args.uplift is not None and args.k is not None:
        raise ArgumentError("give either --uplift or --k with success counts, not both")
    uplift = args.uplift
    if args.k is not None:
        if args.with_successes is None or args.without_successes is None:
            raise ArgumentError("--k needs --with-successes and --without-successes")
        uplift = reward.UpliftEstimate(args.k, args.with_successes, args.without_successes)
    result = reward.compute_reward(args.variant, args.x, args.m, uplift)
    _write(args.out, _dump(result.to_dict()))
    return EXIT_OK


def cmd_reward_advantages(args) -> int:
    values = [float(v) for v in args.rewards.split(",")] if args.rewards else _read_numbers(args.inp)
    _write(args.out, _dump(reward.group_advantages(values, args.delta).to_dict()))
    return EXIT_OK


def cmd_sim_uplift(args) -> int:
    spec = reward.ExecutorSpec(args.q, args.q0)
    mom = reward.monte_carlo(lambda rng, n: reward.sample_uplifts(spec, args.k, rng, n),
                             args.trials, args.seed, args.shards, args.workers)
    result = {"q": args.q, "q0": args.q0, "k": args.k, "trials": args.trials, "seed": args.seed,
              "shards": args.shards, "mean": mom.mean, "variance": mom.variance,
              "analytic_uplift": reward.analytic_uplift(spec),
              "analytic_variance": reward.uplift_variance(spec, args.k),
              "variance_bound": 1 / (2 * args.k)}
    _write(args.out, _dump(result))
    return EXIT_OK


# -------------------------------------------------------------- theory

def cmd_theory_verify(args) -> int:
    if args.suite != "all" and args.suite not in theory.CLAIM_IDS:
        raise ArgumentError(f"unknown claim {args.suite!r}; choose all or one of {theory.CLAIM_IDS}")
    claims = None if args.suite == "all" else [args.suite]
    reps = theory.run_suite(args.seed, args.trials, claims)
    failed = [r.claim_id for r in reps if not r.passed]
    payload: dict = {"reports": [r.to_dict() for r in reps], "failed": failed}
    code = EXIT_FAIL if failed else EXIT_OK
    if args.mutants:
        caught = theory.mutation_harness(args.seed, args.trials)
        payload["mutants"] = caught
        if not all(caught.values()):
            code = EXIT_FAIL
    table = (["Claim", "Mode", "Margin", "Pass"],
             [[r.claim_id, r.mode, f"{float(r.z_or_margin):.4g}", "pass" if r.passed else "FAIL"]
              for r in reps])
    _emit(args, payload, table)
    return code


# ---------------------------------------------------------------- diag

def cmd_diag_saturation(args) -> int:
    res = reports.saturation_diagnostic(_read_numbers(args.inp))
    _emit(args, res.to_dict(), res.table())
    return EXIT_OK


def cmd_diag_rolling(args) -> int:
    values = _read_numbers(args.inp)
    out = reports.rolling_mean(reports.DiagnosticSeries(tuple(values), args.window))
    table = (["Step", "Value", "Rolling mean"], [[i, v, f"{r:.6f}"] for i, (v, r) in enumerate(zip(values, out))])
    _emit(args, {"window": args.window, "rolling_mean": out}, table)
    return EXIT_OK


def cmd_diag_lengths(args) -> int:
    res = reports.length_window_summary(_read_numbers(args.inp))
    _emit(args, res.to_dict(), res.table())
    return EXIT_OK


# -------------------------------------------------------------- report

def cmd_report(args) -> int:
    scored = [reports.ScoredGroup.from_dict(json.loads(line)) for line in _lines(args.inp)]
    rep = reports.rm_validation_metrics(scored)
    table = rep.per_kind_table() if args.per_kind else rep.table()
    _emit(args, rep.to_dict(), table)
    return EXIT_OK


# -------------------------------------------------------------- parser

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="inp", default="-", help="input file, '-' for stdin")
    p.add_argument("--out", default="-", help="output file, '-' for stdout")
    p.add_argument("--format", choices=reports.FORMATS, default="json")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="tracereward", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def leaf(container, name, func, help_text):
        p = container.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = leaf(sub, "clean", cmd_clean, "clean reasoning traces (JSONL in, JSONL out)")
    p.add_argument("--domain", choices=("code", "math"), required=True)
    p.add_argument("--reference-action", help="file holding the reference action to cut before")
    p.add_argument("--spans", help="write removed spans as JSONL to this file")

    g = sub.add_parser("groups", help="reasoning-group datasets").add_subparsers(dest="action", required=True)
    p = leaf(g, "validate", cmd_groups_validate, "schema-check group records")
    p.add_argument("--report", help="write the validation summary as JSON")
    p.add_argument("--lenient-kinds", action="store_true",
                   help="accept negative kinds outside the taxonomy (filter drops them later)")
    p = leaf(g, "filter", cmd_groups_filter, "drop bad negatives and thin groups")
    p.add_argument("--min-negatives", type=int, default=4)
    p.add_argument("--min-tokens", type=int, default=5)
    p.add_argument("--decisions", help="write per-group decisions as JSONL")
    p = leaf(g, "stats", cmd_groups_stats, "dataset statistics tables")
    p.add_argument("--seeds", type=int, help="number of seed problems (default: input count)")
    p.add_argument("--csv-dir", help="also write dataset, perturbation and dimension CSVs here")

    pr = sub.add_parser("prompts", help="annotation prompts").add_subparsers(dest="action", required=True)
    p = leaf(pr, "render-flaw", cmd_prompts_render_flaw, "render a flaw-generation prompt")
    p.add_argument("--kind", required=True)
    p.add_argument("--raw-reason", required=True, help="file with the clean reference reasoning")
    p.add_argument("--action-gt", help="file with the reference answer (math kinds)")
    p.add_argument("--negative-kind")
    p.add_argument("--mutation-target")
    p = leaf(pr, "render-rubric", cmd_prompts_render_rubric, "render a rubric-judge prompt")
    p.add_argument("--domain", choices=("code", "math"), required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--reason", required=True)
    p.add_argument("--action-gt", required=True)
    p = leaf(pr, "parse-judge", cmd_prompts_parse_judge, "parse a rubric-judge reply")
    p.add_argument("--domain", choices=("code", "math"), required=True)
    p.add_argument("--store", help="stub fixture directory to fetch the reply from")
    p.add_argument("--prompt", help="rendered prompt JSON used as the fixture key")

    r = sub.add_parser("rm", help="reasoning reward model").add_subparsers(dest="action", required=True)
    p = leaf(r, "score", cmd_rm_score, "score RM outputs or feature vectors")
    p.add_argument("--model", help="toy RM parameter file for feature records")
    p = leaf(r, "fit", cmd_rm_fit, "train the toy RM on synthetic groups")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--train-groups", type=int, default=200)
    p.add_argument("--heldout-groups", type=int, default=50)
    p.add_argument("--save", help="write the fitted parameters here")
    p = leaf(r, "gradcheck", cmd_rm_gradcheck, "finite-difference check of loss gradients")
    p.add_argument("--points", type=int, default=100)

    w = sub.add_parser("reward", help="composite rewards").add_subparsers(dest="action", required=True)
    p = leaf(w, "compute", cmd_reward_compute, "reward for one trace")
    p.add_argument("--variant", choices=reward.VARIANTS, default="full")
    p.add_argument("--x", type=int, choices=(0, 1), required=True)
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--uplift", type=float, help="u_hat")
    p.add_argument("--k", type=int)
    p.add_argument("--with-successes", type=int)
    p.add_argument("--without-successes", type=int)
    p = leaf(w, "advantages", cmd_reward_advantages, "group-normalized advantages")
    p.add_argument("--delta", type=float, default=reward.DEFAULT_DELTA)
    p.add_argument("--rewards", help="comma-separated rewards (otherwise read from --in)")

    s = sub.add_parser("sim", help="Monte Carlo simulation").add_subparsers(dest="action", required=True)
    p = leaf(s, "uplift", cmd_sim_uplift, "simulate the uplift estimator")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--q0", type=float, required=True)
    p.add_argument("--k", type=int, default=reward.DEFAULT_K)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--shards", type=int, default=4)
    p.add_argument("--workers", type=int, default=1)

    t = sub.add_parser("theory", help="claim verification").add_subparsers(dest="action", required=True)
    p = leaf(t, "verify", cmd_theory_verify, "run the verification suite")
    p.add_argument("--suite", default="all")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--mutants", action="store_true", help="also run the mutation harness")

    d = sub.add_parser("diag", help="training diagnostics").add_subparsers(dest="action", required=True)
    leaf(d, "saturation", cmd_diag_saturation, "judge-score saturation rate")
    p = leaf(d, "rolling", cmd_diag_rolling, "trailing rolling mean")
    p.add_argument("--window", type=int, default=30)
    leaf(d, "lengths", cmd_diag_lengths, "reasoning length summary")

    p = leaf(sub, "report", cmd_report, "RM validation metrics from scored groups")
    p.add_argument("--per-kind", action="store_true", help="tabulate per perturbation kind")
    return parser


USAGE_ERRORS = (ArgumentError, ConfigError, DomainError, FixtureMissingError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceRewardError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
