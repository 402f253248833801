"""Experiment runner CLI.

Every command resolves its configuration (JSON file plus flag overrides,
unknown keys rejected), writes a run manifest before any result file, runs
the experiment, and rewrites the manifest with the SHA-256 digests of the
emitted files.  All randomness flows from the master seed through spawned
seed sequences, so reruns with the same seed reproduce every output byte for
byte (manifest timestamps aside) regardless of --threads.

Commands:
    disagreement   exact/MC disagreement probabilities for named pairs
    critical-n     two-hypothesis and orbit critical sample sizes
    failure-prob   Monte-Carlo failure curves for the built-in learners
    teach          teaching-set construction over random targets
    flow           gradient-flow curves on comparison teaching sets
    margin-n       samples-to-exactness for the max-margin classifier
    logic-gen      propositional problem datasets (rp / lp recipes)
    logic-verify   answer/trace verification of a predictions file
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

ARTIFACT_VERSION = "0.1.0"


class ConfigError(ValueError):
    pass


def _load_config(path, overrides, allowed, defaults):
    config = dict(defaults)
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key not in allowed:
                raise ConfigError(f"unknown config key {key!r}")
            config[key] = value
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r}")
        config[key] = value
    return config


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    out_dir: str

    def __post_init__(self):
        self.path = os.path.join(self.out_dir, "manifest.json")
        self.started_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        self.outputs = {}

    def write_initial(self):
        os.makedirs(self.out_dir, exist_ok=True)
        self._dump(finished_at=None)

    def finish(self, output_files):
        self.outputs = {os.path.basename(p): _sha256(p) for p in output_files}
        self._dump(finished_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))

    def _dump(self, finished_at):
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "artifact_version": ARTIFACT_VERSION,
            "started_at": self.started_at,
            "finished_at": finished_at,
            "outputs": self.outputs,
        }
        with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _parse_int_list(text):
    return [int(v) for v in str(text).split(",") if v != ""]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_disagreement(args):
    allowed = {"m_values", "d_values", "mc_samples"}
    config = _load_config(
        args.config,
        {"m_values": args.m, "mc_samples": args.samples},
        allowed,
        {"m_values": [1, 2, 3, 4, 5, 6, 7], "d_values": [3, 4], "mc_samples": 20000},
    )
    manifest = RunManifest("disagreement", config, args.seed, args.out)
    manifest.write_initial()
    from .disagreement import UniformHypercube, disagreement_prob
    from .hypercube import all_zero, geq_compare, gt_compare, origin_indicator

    seeds = np.random.SeedSequence(args.seed).spawn(
        2 * (len(config["m_values"]) + len(config["d_values"]))
    )
    rows = []
    si = 0
    for m in config["m_values"]:
        pair = (geq_compare(m), gt_compare(m))
        dist = UniformHypercube(2 * m)
        exact = disagreement_prob(*pair, dist, mode="exact")
        mc = disagreement_prob(
            *pair, dist, mode="monte_carlo", samples=config["mc_samples"], seed=seeds[si]
        )
        si += 1
        rows.append([f"h_ge_vs_h_gt(m={m})", "exact", _fmt(float(exact.probability)),
                     _fmt(exact.probability), 0, _fmt(0.0)])
        rows.append([f"h_ge_vs_h_gt(m={m})", "monte_carlo", _fmt(mc.probability), "",
                     mc.sample_count, _fmt(mc.confidence_halfwidth)])
        self_pair = disagreement_prob(pair[0], pair[0], dist, mode="exact")
        rows.append([f"h_ge_self(m={m})", "exact", _fmt(float(self_pair.probability)),
                     _fmt(self_pair.probability), 0, _fmt(0.0)])
    for d in config["d_values"]:
        pair = (all_zero(d), origin_indicator(d))
        dist = UniformHypercube(d)
        exact = disagreement_prob(*pair, dist, mode="exact")
        mc = disagreement_prob(
            *pair, dist, mode="monte_carlo", samples=config["mc_samples"], seed=seeds[si]
        )
        si += 1
        rows.append([f"f0_vs_f1(d={d})", "exact", _fmt(float(exact.probability)),
                     _fmt(exact.probability), 0, _fmt(0.0)])
        rows.append([f"f0_vs_f1(d={d})", "monte_carlo", _fmt(mc.probability), "",
                     mc.sample_count, _fmt(mc.confidence_halfwidth)])
    out = os.path.join(args.out, "disagreement.csv")
    _write_csv(out, ["pair", "method", "probability", "probability_exact", "samples", "halfwidth"], rows)
    manifest.finish([out])
    return 0


def cmd_critical_n(args):
    allowed = {"m_values", "d_values", "orbit_cap"}
    config = _load_config(
        args.config,
        {"m_values": args.m, "d_values": args.d},
        allowed,
        {"m_values": [1, 2, 3, 4, 5], "d_values": [3], "orbit_cap": 100_000},
    )
    manifest = RunManifest("critical-n", config, args.seed, args.out)
    manifest.write_initial()
    from .disagreement import (
        UniformHypercube,
        critical_sample_size,
        disagreement_prob,
        orbit_critical_sample_size,
    )
    from .hypercube import all_zero, geq_compare, gt_compare, origin_indicator
    from .symmetry import transposition_generators

    rows = []
    for m in config["m_values"]:
        dist = UniformHypercube(2 * m)
        p = disagreement_prob(geq_compare(m), gt_compare(m), dist).probability
        n1 = critical_sample_size([p])
        if 2 * m <= 6:
            orbit = orbit_critical_sample_size(
                geq_compare(m), transposition_generators(2 * m), dist,
                cap=config["orbit_cap"],
            )
            orbit_n, orbit_complete = orbit.n_critical, orbit.complete
        else:
            orbit_n, orbit_complete = "", ""  # full group too large; pairwise row stands
        rows.append([f"comparison(m={m})", "thm1_pair", _fmt(p), n1, "", ""])
        rows.append([f"comparison(m={m})", "thm2_orbit", "", orbit_n if orbit_n is not None else "none",
                     orbit_complete, ""])
    for d in config["d_values"]:
        dist = UniformHypercube(d)
        p = disagreement_prob(all_zero(d), origin_indicator(d), dist).probability
        rows.append([f"origin_family(d={d})", "thm1_pair", _fmt(p), critical_sample_size([p]), "", ""])
    rows.append(["single_hypothesis", "thm1_pair", "", "unbounded", "", "no distinct pair"])
    out = os.path.join(args.out, "critical_n.csv")
    _write_csv(out, ["family", "bound", "min_disagreement", "critical_n", "complete", "note"], rows)
    manifest.finish([out])
    return 0


def cmd_failure_prob(args):
    allowed = {"d", "n_values", "trials", "learners"}
    config = _load_config(
        args.config,
        {"d": args.d_scalar, "n_values": args.n_grid, "trials": args.trials,
         "learners": args.learners},
        allowed,
        {"d": 3, "n_values": [1, 2, 3, 4, 5, 6, 7, 8], "trials": 10000, "learners": None},
    )
    manifest = RunManifest("failure-prob", config, args.seed, args.out)
    manifest.write_initial()
    from .disagreement import UniformHypercube, disagreement_prob, failure_lower_bound
    from .hypercube import all_zero, origin_indicator
    from .learners import builtin_learners, estimate_failure

    d = int(config["d"])
    zoo = builtin_learners()
    names = config["learners"] or sorted(zoo)
    unknown = set(names) - set(zoo)
    if unknown:
        raise ConfigError(f"unknown learners: {sorted(unknown)}")
    f0, f1 = all_zero(d), origin_indicator(d)
    dist = UniformHypercube(d)
    agree = 1.0 - float(disagreement_prob(f0, f1, dist).probability)
    seeds = np.random.SeedSequence(args.seed).spawn(len(names) * len(config["n_values"]) * 2)
    rows = []
    si = 0
    for name in names:
        for n in config["n_values"]:
            ests = []
            for target_name, target in (("all_zero", f0), ("origin_indicator", f1)):
                est = estimate_failure(zoo[name], target, dist, int(n), int(config["trials"]),
                                       seed=seeds[si])
                si += 1
                ests.append((target_name, est))
                rows.append([name, target_name, n, _fmt(est.phi_hat), _fmt(est.confidence_halfwidth),
                             est.trials, est.fit_error_count, ""])
            phi_max = max(e.phi_hat for _, e in ests)
            bound = failure_lower_bound(int(n), agree)
            rows.append([name, "max_pair", n, _fmt(phi_max), "", int(config["trials"]), "",
                         _fmt(bound.power)])
    out = os.path.join(args.out, "failure_prob.csv")
    _write_csv(out, ["learner", "target", "n", "phi_hat", "halfwidth", "trials",
                     "fit_errors", "thm1_power_bound"], rows)
    manifest.finish([out])
    return 0


def cmd_teach(args):
    allowed = {"d", "count"}
    config = _load_config(
        args.config, {"d": args.d_scalar, "count": args.count}, allowed, {"d": 6, "count": 100}
    )
    manifest = RunManifest("teach", config, args.seed, args.out)
    manifest.write_initial()
    from .hypercube import LinearThreshold, domain_bits
    from .maxmargin import teaching_set

    d = int(config["d"])
    count = int(config["count"])
    seeds = np.random.SeedSequence(args.seed).spawn(count)

    def one(i):
        rng = np.random.default_rng(seeds[i])
        B = domain_bits(d).astype(np.float64)
        while True:
            w = rng.standard_normal(d)
            b = rng.standard_normal() * 0.5
            labels = (B @ w + b) >= 0
            if labels.any() and not labels.all():
                break
        target = LinearThreshold.from_floats(w, b)
        ts = teaching_set(target)
        return [i, ts.size, ts.difference_count, ts.certified]

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(one, range(count)))
    else:
        rows = [one(i) for i in range(count)]
    certified = sum(1 for r in rows if r[3])
    max_size = max(r[1] for r in rows)
    out = os.path.join(args.out, "teach.csv")
    _write_csv(out, ["target", "size", "differences", "certified"], rows)
    summary = os.path.join(args.out, "teach_summary.csv")
    _write_csv(summary, ["d", "targets", "certified", "max_size", "size_cap"],
               [[d, count, certified, max_size, 2 * d + 2]])
    manifest.finish([out, summary])
    print(f"certified={certified}/{count}, max_size={max_size} (cap {2*d+2})")
    return 0 if certified == count else 1


def cmd_flow(args):
    allowed = {"m_values", "t_max", "checkpoints_per_decade", "rtol", "atol"}
    config = _load_config(
        args.config,
        {"m_values": args.m, "t_max": args.t_max},
        allowed,
        {"m_values": [2, 3, 4, 5], "t_max": 1e10, "checkpoints_per_decade": 64,
         "rtol": 1e-7, "atol": 1e-9},
    )
    manifest = RunManifest("flow", config, args.seed, args.out)
    manifest.write_initial()
    from .flow import slow_learning_experiment, time_to_exact

    curves = slow_learning_experiment(
        [int(m) for m in config["m_values"]],
        t_max=float(config["t_max"]),
        checkpoints_per_decade=int(config["checkpoints_per_decade"]),
        rtol=float(config["rtol"]),
        atol=float(config["atol"]),
    )
    outputs = []
    for m, curve in curves.items():
        path = os.path.join(args.out, f"flow_m{m}.csv")
        _write_csv(
            path,
            ["t", "loss", "exact", "cosine"],
            [[_fmt(p.time), _fmt(p.loss), int(p.exact), _fmt(p.cosine)] for p in curve.points],
        )
        outputs.append(path)
    tte = time_to_exact(curves)
    summary = os.path.join(args.out, "flow_summary.csv")
    _write_csv(
        summary,
        ["m", "time_to_exact", "final_cosine", "final_loss"],
        [
            [m, _fmt(tte[m]) if tte[m] is not None else "not_reached",
             _fmt(curves[m].cosines()[-1]), _fmt(curves[m].losses()[-1])]
            for m in sorted(curves)
        ],
    )
    outputs.append(summary)
    manifest.finish(outputs)
    return 0


def cmd_margin_n(args):
    allowed = {"m_values", "seeds", "n_grid"}
    config = _load_config(
        args.config,
        {"m_values": args.m, "seeds": args.n_seeds, "n_grid": args.n_grid},
        allowed,
        {"m_values": [2, 3, 4], "seeds": 20, "n_grid": None},
    )
    manifest = RunManifest("margin-n", config, args.seed, args.out)
    manifest.write_initial()
    from .flow import margin_sample_experiment, median_n_star

    ms = [int(m) for m in config["m_values"]]
    seed_lists = {
        m: [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(int(config["seeds"]))]
        for m in ms
    }

    def one(m):
        return margin_sample_experiment(m, seed_lists[m], n_grid=config["n_grid"])

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            all_results = list(pool.map(one, ms))
    else:
        all_results = [one(m) for m in ms]
    rows = []
    summary_rows = []
    for m, results in zip(ms, all_results):
        for r in results:
            for n, fraction, exact in r.rows:
                rows.append([m, r.seed, n, _fmt(fraction), int(exact)])
        med = median_n_star(results)
        summary_rows.append([m, _fmt(med)])
    out = os.path.join(args.out, "margin_n.csv")
    _write_csv(out, ["m", "seed", "n", "fraction_correct", "exact"], rows)
    summary = os.path.join(args.out, "margin_n_summary.csv")
    _write_csv(summary, ["m", "median_n_star"], summary_rows)
    manifest.finish([out, summary])
    return 0


def cmd_logic_gen(args):
    allowed = {"recipe", "count", "pool_range", "rule_range", "max_depth", "retry_cap"}
    config = _load_config(
        args.config,
        {"recipe": args.recipe, "count": args.count},
        allowed,
        {"recipe": "rp", "count": 1000, "pool_range": [5, 20], "rule_range": [0, 40],
         "max_depth": 6, "retry_cap": 500},
    )
    manifest = RunManifest("logic-gen", config, args.seed, args.out)
    manifest.write_initial()
    from .logic import GeneratorConfig, generate_dataset, render, write_dataset

    gen_config = GeneratorConfig(
        predicate_pool_range=tuple(config["pool_range"]),
        rule_count_range=tuple(config["rule_range"]),
        max_depth=int(config["max_depth"]),
        retry_cap=int(config["retry_cap"]),
    )
    items = generate_dataset(config["recipe"], int(config["count"]), gen_config, args.seed)
    data_path = os.path.join(args.out, "dataset.jsonl")
    write_dataset(data_path, items, config["recipe"], gen_config, args.seed)
    text_path = os.path.join(args.out, "dataset.txt")
    with open(text_path, "w", encoding="utf-8", newline="\n") as fh:
        for problem, trace in items:
            fh.write(render(problem, trace, style="with_reasoning") + "\n")
    yes = sum(1 for p, _ in items if p.label == "yes") / len(items)
    depths = np.array([p.depth for p, _ in items])
    stats_path = os.path.join(args.out, "stats.json")
    stats = {
        "count": len(items),
        "yes_fraction": yes,
        "depth_histogram": {str(k): int(np.sum(depths == k)) for k in range(int(config["max_depth"]) + 1)},
        "mean_rules": float(np.mean([len(p.rules) for p, _ in items])),
        "mean_pool": float(np.mean([len(p.pool) for p, _ in items])),
    }
    with open(stats_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.finish([data_path, text_path, stats_path])
    print(f"yes_fraction={yes:.4f}")
    return 0


def cmd_logic_verify(args):
    allowed = {"dataset", "answers"}
    config = _load_config(
        args.config, {"dataset": args.dataset, "answers": args.answers}, allowed,
        {"dataset": None, "answers": None},
    )
    if not config["dataset"] or not config["answers"]:
        raise ConfigError("logic-verify needs --dataset and --answers")
    manifest = RunManifest("logic-verify", config, args.seed, args.out)
    manifest.write_initial()
    from .logic import parse, read_dataset, verify_answer, verify_trace

    _, items = read_dataset(config["dataset"])
    by_id = {i: problem for i, (problem, _) in enumerate(items)}
    verdicts = []
    correct = 0
    total = 0
    with open(config["answers"], "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            pid = rec["id"]
            problem = by_id.get(pid)
            if problem is None:
                verdicts.append({"id": pid, "error": "unknown problem id"})
                continue
            total += 1
            answer = rec.get("answer")
            trace_verdict = None
            if "text" in rec:
                try:
                    parsed, trace = parse(rec["text"])
                    answer = parsed.label
                    if trace is not None:
                        tv = verify_trace(problem, trace)
                        trace_verdict = {"accepted": tv.accepted, "step": tv.step_index,
                                         "reason": tv.reason}
                except Exception as exc:  # malformed output is a rejection, not a crash
                    verdicts.append({"id": pid, "answer_accepted": False,
                                     "error": f"unparseable: {exc}"})
                    continue
            ok = verify_answer(problem, answer)
            correct += ok
            verdict = {"id": pid, "answer_accepted": ok}
            if trace_verdict is not None:
                verdict["trace"] = trace_verdict
            verdicts.append(verdict)
    out = os.path.join(args.out, "verdicts.jsonl")
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for v in verdicts:
            fh.write(json.dumps(v, sort_keys=True) + "\n")
    rate = correct / total if total else 0.0
    summary = os.path.join(args.out, "verify_summary.json")
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"items": total, "answer_exactness_rate": rate}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.finish([out, summary])
    print(f"exactness_rate={rate:.4f} over {total} items")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="exactlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disagreement", help="disagreement probabilities for named pairs")
    _add_common(p)
    p.add_argument("--m", type=_parse_int_list, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_disagreement)

    p = sub.add_parser("critical-n", help="critical sample sizes")
    _add_common(p)
    p.add_argument("--m", type=_parse_int_list, default=None)
    p.add_argument("--d", type=_parse_int_list, default=None)
    p.set_defaults(func=cmd_critical_n)

    p = sub.add_parser("failure-prob", help="Monte-Carlo failure probabilities")
    _add_common(p)
    p.add_argument("--d", dest="d_scalar", type=int, default=None)
    p.add_argument("--n-grid", type=_parse_int_list, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--learners", type=lambda s: s.split(","), default=None)
    p.set_defaults(func=cmd_failure_prob)

    p = sub.add_parser("teach", help="teaching sets for random targets")
    _add_common(p)
    p.add_argument("--d", dest="d_scalar", type=int, default=None)
    p.add_argument("--count", type=int, default=None)
    p.set_defaults(func=cmd_teach)

    p = sub.add_parser("flow", help="gradient-flow curves on teaching sets")
    _add_common(p)
    p.add_argument("--m", type=_parse_int_list, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("margin-n", help="samples needed for max-margin exactness")
    _add_common(p)
    p.add_argument("--m", type=_parse_int_list, default=None)
    p.add_argument("--seeds", dest="n_seeds", type=int, default=None)
    p.add_argument("--n-grid", type=_parse_int_list, default=None)
    p.set_defaults(func=cmd_margin_n)

    p = sub.add_parser("logic-gen", help="generate a logic dataset")
    _add_common(p)
    p.add_argument("--recipe", choices=("rp", "lp"), default=None)
    p.add_argument("--count", type=int, default=None)
    p.set_defaults(func=cmd_logic_gen)

    p = sub.add_parser("logic-verify", help="verify answers against a dataset")
    _add_common(p)
    p.add_argument("--dataset", default=None)
    p.add_argument("--answers", default=None)
    p.set_defaults(func=cmd_logic_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error(args, "config", str(exc))
        return 2
    except Exception as exc:  # noqa: BLE001 - surface as machine-readable record
        _emit_error(args, type(exc).__name__, str(exc))
        return 1


def _emit_error(args, kind, message):
    record = {"error": kind, "message": message, "command": args.command}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    try:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "error.json"), "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError:
        pass


if __name__ == "__main__":
    raise SystemExit(main())
