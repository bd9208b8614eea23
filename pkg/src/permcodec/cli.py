"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 budget refusal,
4 failed ``--assert-bounds`` check.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import concentration as conc
from .cipher import build_cipher, load_cipher, save_cipher
from .config import ExperimentConfig
from .leakage import LeakageReport
from .core import BudgetExceeded, DistortionMeasure, SourceModel, ValidationError, derive_rng
from .pipeline import SYSTEMS, compare_systems, run_reversed_pipeline, stream
from .rd import ConvergenceError, RateDistortionCodec, load_codebook, rd_sweep, save_codebook
from .reporting import flatten, plain, to_csv, to_json
from .typeclass import type_distribution

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_ASSERT = 0, 2, 3, 4

log = logging.getLogger("permcodec")


class AssertionFailed(Exception):
    pass


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _sequence(text):
    text = text.strip()
    if "," in text:
        return np.array([int(v) for v in text.split(",")], dtype=np.int64)
    return np.array([int(c) for c in text], dtype=np.int64)


def _emit(args, json_obj, csv_header=None, csv_rows=None):
    if args.format == "csv":
        if csv_header is None:
            pairs = flatten(plain(json_obj))
            text = to_csv(("field", "value"), pairs)
        else:
            text = to_csv(csv_header, csv_rows)
    else:
        text = to_json(json_obj)
    if args.out:
        Path(args.out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _config(args) -> ExperimentConfig:
    raw = json.loads(Path(args.config).read_text()) if getattr(args, "config", None) else {}
    return ExperimentConfig.from_dict(raw, seed=getattr(args, "seed", None))


def cmd_rd_sweep(args):
    if args.config:
        cfg = _config(args)
        source, d, slopes = cfg.source, cfg.distortion, cfg["rd_sweep"]["slopes"]
    else:
        source = SourceModel(_floats(args.pmf))
        d = DistortionMeasure.hamming(source.alphabet_size)
        slopes = _floats(args.slopes)
    pts = rd_sweep(source, d, slopes)
    rows = [(p.slope, p.distortion, p.rate, p.rate_bits) for p in pts]
    obj = {"points": [dict(zip(("slope", "D", "R_nats", "R_bits"), r)) for r in rows]}
    _emit(args, obj, ("slope", "D", "R_nats", "R_bits"), rows)


def cmd_encrypt(args):
    if args.cipher_file:
        cipher = load_cipher(args.cipher_file)
    else:
        if args.seed is None or args.n_keys is None:
            raise ValidationError("--seed and --n-keys are required unless --cipher-file is given")
        x = _sequence(args.sequence)
        cipher = build_cipher(args.kind, x.size, args.n_keys, derive_rng(args.seed, "cipher"))
    if args.save_cipher:
        save_cipher(cipher, args.save_cipher)
    x = _sequence(args.sequence)
    y = cipher.inverse_transform(x, args.key) if args.decrypt else cipher.transform(x, args.key)
    obj = {
        "operation": "decrypt" if args.decrypt else "encrypt",
        "kind": cipher.kind,
        "n_keys": int(cipher.n_keys),
        "key": args.key,
        "input": x,
        "output": y,
        "permutation": cipher.resolve(args.key),
    }
    _emit(args, obj)


def cmd_compress(args):
    x = _sequence(args.sequence)
    if args.codebook_file:
        codec = RateDistortionCodec.from_codebook(load_codebook(args.codebook_file))
    else:
        if args.seed is None or args.n_codewords is None:
            raise ValidationError("--seed and --n-codewords are required unless --codebook-file is given")
        codec = RateDistortionCodec(
            n_codewords=args.n_codewords,
            source_pmf=_floats(args.pmf),
            random_state=derive_rng(args.seed, "codebook"),
        ).fit(x[None, :])
    if args.save_codebook:
        save_codebook(codec.codebook_, args.save_codebook)
    j = codec.transform(x)
    y = codec.inverse_transform(j)
    d = codec.distortion_
    obj = {"input": x, "index": j, "reconstruction": y, "distortion": float(d.matrix[x, y].mean()),
           "rate_bits": codec.codebook_.rate_bits}
    _emit(args, obj)


def _assert_reversed_leakage(rep):
    lk = rep.get("leakage")
    if not lk:
        return
    failures = []
    total = lk.get("total", {})
    if total.get("holds") is False:
        failures.append("decomposition inequality violated")
    if lk["type_entropy_nats"] > lk["type_entropy_bound_nats"] + 1e-12:
        failures.append("type entropy exceeds |X| ln(n+1)")
    for row in lk["per_type"]:
        if row["eta"] > row["bound"]["M"] / row["bound"]["Delta"] + 1e-15:
            failures.append(f"eta > M/Delta for type {row['counts']}")
        if row["leakage_nats"] > row["bound"]["total"]:
            failures.append(f"leakage exceeds T1+T2+T3 for type {row['counts']}")
    if failures:
        raise AssertionFailed("; ".join(failures))


def cmd_pipeline(args):
    cfg = _config(args)
    rep = SYSTEMS[args.system](cfg)
    _emit(args, rep)
    if args.assert_bounds:
        if args.system == "reversed":
            _assert_reversed_leakage(rep)
        elif rep.get("leakage", {}).get("total_nats", 0.0) > 1e-12:
            raise AssertionFailed("conventional system leaks information")


def cmd_leakage(args):
    cfg = ExperimentConfig.from_dict(
        json.loads(Path(args.config).read_text()) if args.config else {},
        seed=args.seed,
        analyses={"leakage": True, "concentration": False, "rd_sweep": False},
    )
    rep = run_reversed_pipeline(cfg)
    lk = rep["leakage"]
    rows = [
        (" ".join(map(str, t["counts"])), t["type_size"], t["probability"], t["leakage_nats"], t["leakage_bits"],
         t["bound"]["T1"], t["bound"]["T2"], t["bound"]["T3"], t["bound"]["total"], t["eta"], lk["Delta"],
         lk["delta"], lk["N"], lk["M"], lk["seed"])
        for t in lk["per_type"]
    ]
    _emit(args, {"config": rep["config"], "cipher": rep["cipher"], "leakage": lk}, LeakageReport.CSV_COLUMNS, rows)
    if args.assert_bounds:
        _assert_reversed_leakage(rep)


def cmd_concentration(args):
    cfg = _config(args)
    c = cfg["concentration"]
    types, probs = type_distribution(cfg.source, cfg.n)
    P = types[int(np.argmax(probs))]
    N = c["n_keys"] or cfg.N
    kinds = [args.kind] if args.kind else ["mutual", "pairwise"]
    experiments, rows = [], []
    for kind in kinds:
        exp = conc.DeviationExperiment.from_fraction(P, c["q"], N, c["delta"], c["Delta"], kind, c["trials"])
        seed = int(stream(cfg, f"concentration/{kind}").integers(2**63))
        est = conc.deviation_tail_estimate(exp, seed)
        rows.append(conc.csv_row(exp, est))
        experiments.append(dict(zip(conc.CSV_COLUMNS, rows[-1])) | {"events": est.events, "type": list(P.counts)})
    obj = {"config": cfg.to_dict(), "experiments": experiments,
           "chernoff_chebyshev_crossover": conc.bound_crossover(c["delta"])}
    _emit(args, obj, conc.CSV_COLUMNS, rows)
    if args.assert_bounds and any(e["verdict"] == "violated" for e in experiments):
        raise AssertionFailed("empirical tail exceeds its bound")


def cmd_compare(args):
    cfg = _config(args)
    rep = compare_systems(cfg)
    cols = ("system", "R_nats", "R_s_nats", "distortion", "distortion_ci", "leakage_total_nats",
            "leakage_given_type_nats", "type_entropy_nats", "type_entropy_bound_nats")
    rows = [tuple(r[c] for c in cols) for r in rep["systems"]]
    _emit(args, rep, cols, rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="permcodec", description="Permutation-cipher encrypt-then-compress experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=True, config=True):
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out", help="write the report here instead of stdout")
        if config:
            sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--seed", type=int, required=seed_required, help="master seed")

    sp = sub.add_parser("rd-sweep", help="trace R(D) with Blahut-Arimoto")
    common(sp, seed_required=False)
    sp.add_argument("--pmf", default="0.5,0.5")
    sp.add_argument("--slopes", default="0,0.5,1,1.5,2,3,4,6,8")
    sp.set_defaults(func=cmd_rd_sweep)

    sp = sub.add_parser("encrypt", help="encrypt (or --decrypt) one sequence with a permutation cipher")
    common(sp, seed_required=False, config=False)
    sp.add_argument("--sequence", required=True, help="symbols, e.g. 0101 or 0,1,2")
    sp.add_argument("--key", type=int, required=True)
    sp.add_argument("--kind", choices=("I", "II"), default="I")
    sp.add_argument("--n-keys", type=int)
    sp.add_argument("--cipher-file")
    sp.add_argument("--save-cipher")
    sp.add_argument("--decrypt", action="store_true")
    sp.set_defaults(func=cmd_encrypt)

    sp = sub.add_parser("compress", help="compress one sequence with a random codebook")
    common(sp, seed_required=False, config=False)
    sp.add_argument("--sequence", required=True)
    sp.add_argument("--pmf", default="0.5,0.5")
    sp.add_argument("--n-codewords", type=int)
    sp.add_argument("--codebook-file")
    sp.add_argument("--save-codebook")
    sp.set_defaults(func=cmd_compress)

    sp = sub.add_parser("pipeline", help="run an end-to-end system")
    psub = sp.add_subparsers(dest="action", required=True)
    run = psub.add_parser("run")
    common(run)
    run.add_argument("--system", choices=tuple(SYSTEMS), default="reversed")
    run.add_argument("--assert-bounds", action="store_true")
    run.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("leakage", help="exact per-type leakage of the reversed system")
    common(sp)
    sp.add_argument("--assert-bounds", action="store_true")
    sp.set_defaults(func=cmd_leakage)

    sp = sub.add_parser("concentration", help="Monte Carlo tail checks")
    common(sp)
    sp.add_argument("--kind", choices=("mutual", "pairwise"))
    sp.add_argument("--assert-bounds", action="store_true")
    sp.set_defaults(func=cmd_concentration)

    sp = sub.add_parser("compare", help="reversed vs conventional side by side")
    common(sp)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValidationError, ConvergenceError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except AssertionFailed as exc:
        print(f"bound check failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
