"""End-to-end reversed (permute, then compress) and conventional (compress, then pad) systems."""

from __future__ import annotations

import itertools
import logging
import time

import numpy as np

from .cipher import ModuloSumCipher, build_cipher
from .concentration import DeviationExperiment, deviation_tail_estimate
from .config import ExperimentConfig
from .core import BudgetExceeded, ValidationError, derive_rng, mutual_information_from_counts, to_bits
from .leakage import leakage_given_type_marginal, best_cipher_search, total_leakage_decomposition_check
from .rd import RateDistortionCodec, rd_point_at_rate, rd_sweep, summarize
from .reporting import fingerprint
from .typeclass import type_distribution, type_info_bound

log = logging.getLogger(__name__)

STREAMS = ("source", "keys", "cipher", "codebook", "concentration", "ensemble")


def stream(cfg: ExperimentConfig, role: str):
    return derive_rng(cfg.seed, role)


def build_codec(cfg: ExperimentConfig) -> RateDistortionCodec:
    codec = RateDistortionCodec(
        n_codewords=cfg.M,
        distortion=cfg.distortion,
        target_distortion=cfg["target_distortion"],
        source_pmf=list(cfg.source.pmf),
        random_state=stream(cfg, "codebook"),
    )
    return codec.fit(np.zeros((1, cfg.n), dtype=np.int64))


def _samples(cfg):
    src = cfg.source
    X = stream(cfg, "source").choice(src.alphabet_size, size=(cfg["trials"], cfg.n), p=src.probabilities)
    keys = stream(cfg, "keys").integers(cfg.N, size=cfg["trials"])
    return X.astype(np.int64), keys.astype(np.int64)


def _rates(cfg):
    return {
        "R_nats": cfg.rate,
        "R_bits": to_bits(cfg.rate),
        "R_s_nats": cfg.key_rate,
        "R_s_bits": to_bits(cfg.key_rate),
        "epsilon_nats": cfg.key_rate - cfg.rate,
        "M": cfg.M,
        "N": cfg.N,
    }


def _distortion_block(values, cfg, codec):
    perf = summarize(values, codec.codebook_.rate)
    rd = rd_point_at_rate(cfg.source, cfg.distortion, cfg.rate)
    return {
        "mean": perf.mean_distortion,
        "std_error": perf.std_error,
        "ci_half_width": perf.half_width,
        "trials": perf.trials,
        "rd_bound_at_rate": rd.distortion,
    }


def _base_report(cfg, system, codec):
    return {
        "system": system,
        "config": cfg.to_dict(),
        "seeds": {"master": cfg.seed, "streams": list(STREAMS)},
        "rates": _rates(cfg),
        "rd_point": {
            "rate_nats": codec.rd_point_.rate,
            "distortion": codec.rd_point_.distortion,
            "slope": codec.rd_point_.slope,
            "output_marginal": codec.rd_point_.output_marginal,
        },
        "codebook": {"n_codewords": codec.codebook_.size, "fingerprint": fingerprint(codec.codebook_.to_dict())},
    }


def reversed_distortions(cfg, cipher, codec, X, keys):
    Y = cipher.transform(X, keys)
    Yhat = codec.inverse_transform(codec.transform(Y))
    Xhat = cipher.inverse_transform(Yhat, keys)
    return cfg.distortion.matrix[X, Xhat].mean(axis=1)


def conventional_distortions(cfg, codec, X, keys):
    pad_cipher = ModuloSumCipher(max(cfg.M, 2))
    pads = keys % cfg.M
    J = codec.transform(X)
    if cfg.M >= 2:
        C = pad_cipher.encrypt(J, pads)
        J = pad_cipher.decrypt(C, pads)
    Xhat = codec.inverse_transform(J)
    return cfg.distortion.matrix[X, Xhat].mean(axis=1)


def _concentration(cfg, kind):
    c = cfg["concentration"]
    types, probs = type_distribution(cfg.source, cfg.n)
    P = types[int(np.argmax(probs))]
    N = c["n_keys"] or cfg.N
    exp = DeviationExperiment.from_fraction(P, c["q"], N, c["delta"], c["Delta"], kind, c["trials"])
    est = deviation_tail_estimate(exp, int(stream(cfg, "concentration").integers(2**63)))
    return {
        "type": list(P.counts),
        "kind": exp.kind,
        "q": exp.q,
        "N": N,
        "Delta": exp.Delta,
        "delta": exp.delta,
        "trials": exp.trials,
        "events": est.events,
        "empirical": est.empirical,
        "ci_half_width": est.half_width,
        "bound": est.bound,
        "verdict": est.verdict,
    }


def _sweep(cfg):
    pts = rd_sweep(cfg.source, cfg.distortion, cfg["rd_sweep"]["slopes"])
    return [{"slope": p.slope, "D": p.distortion, "R_nats": p.rate, "R_bits": p.rate_bits} for p in pts]


def reversed_leakage(cfg, cipher, codec) -> dict:
    cfg.require_positive_margin()
    pairs = int(cfg["budgets"]["pairs"])
    lk = cfg["leakage"]
    rep = leakage_given_type_marginal(cipher, codec, cfg.source, cfg.n, Delta=lk["Delta"], delta=lk["delta"],
                                      seed=cfg.seed, pair_budget=pairs)
    out = rep.to_dict()
    try:
        chk = total_leakage_decomposition_check(cipher, codec, cfg.source, cfg.n, pair_budget=pairs)
        out["total"] = {"lhs_nats": chk.lhs, "rhs_nats": chk.rhs, "slack_nats": chk.slack, "holds": chk.holds}
    except BudgetExceeded as exc:
        out["total"] = {"skipped": str(exc)}
    return out


def all_sequences(alphabet_size: int, n: int, budget: int) -> np.ndarray:
    total = alphabet_size**n
    if total > budget:
        raise BudgetExceeded("enumerating all sequences", total, budget)
    return np.array(list(itertools.product(range(alphabet_size), repeat=n)), dtype=np.int64)


def conventional_leakage(cfg, codec) -> dict:
    """Exact ``I(X^n; (g(X^n) + K) mod M)`` over all sequences and keys."""
    src = cfg.source
    seqs = all_sequences(src.alphabet_size, cfg.n, int(cfg["budgets"]["enumeration"]))
    with np.errstate(divide="ignore"):
        logp = np.log(src.probabilities)
    logw = logp[seqs].sum(axis=1)
    weights = np.exp(logw)
    labels = codec.transform(seqs)
    M, N = cfg.M, cfg.N
    counts = np.zeros((seqs.shape[0], M), dtype=np.int64)
    rows = np.arange(seqs.shape[0])
    # N is a multiple of M, so every pad value is used by N // M keys
    for pad in range(M):
        counts[rows, (labels + pad) % M] += N // M
    mi = mutual_information_from_counts(counts, weights)
    return {"total_nats": mi, "total_bits": to_bits(mi), "conditional_leakage_nats": 0.0}


def _check_conventional(cfg):
    if cfg.N % cfg.M != 0:
        raise ValidationError(
            f"conventional system pads the index modulo M={cfg.M}; n_keys={cfg.N} must be a multiple of M "
            "so the pad is uniform"
        )


def run_reversed_pipeline(cfg: ExperimentConfig, cipher=None, codec=None) -> dict:
    """Permutation cipher then lossy compressor; receiver reconstructs then decrypts."""
    start = time.perf_counter()
    if codec is None:
        codec = build_codec(cfg)
    if cipher is None:
        cipher = build_cipher(cfg["cipher_kind"], cfg.n, cfg.N, stream(cfg, "cipher"))
    X, keys = _samples(cfg)
    rep = _base_report(cfg, "reversed", codec)
    rep["distortion"] = _distortion_block(reversed_distortions(cfg, cipher, codec, X, keys), cfg, codec)
    rep["cipher"] = {
        "kind": cipher.kind,
        "n_keys": int(cipher.n_keys),
        "stored_permutations": int(cipher.stored_permutations().shape[0]),
        "fingerprint": fingerprint(cipher.to_dict()),
    }
    if cipher.kind == "II":
        # the all-zero key composes no base permutation
        rep["cipher"]["identity_keys"] = [0]
    an = cfg["analyses"]
    if an["leakage"]:
        rep["leakage"] = reversed_leakage(cfg, cipher, codec)
    if an["concentration"]:
        rep["concentration"] = _concentration(cfg, cipher.kind)
    if an["rd_sweep"]:
        rep["rd_sweep"] = _sweep(cfg)
    log.info("reversed pipeline finished in %.3f s", time.perf_counter() - start)
    return rep


def run_conventional_pipeline(cfg: ExperimentConfig, codec=None) -> dict:
    """Compressor then modulo-sum pad on the index; receiver removes the pad, then reconstructs."""
    start = time.perf_counter()
    _check_conventional(cfg)
    if codec is None:
        codec = build_codec(cfg)
    X, keys = _samples(cfg)
    rep = _base_report(cfg, "conventional", codec)
    rep["distortion"] = _distortion_block(conventional_distortions(cfg, codec, X, keys), cfg, codec)
    rep["cipher"] = {"kind": "modulo-sum", "modulus": cfg.M, "n_keys": cfg.N}
    an = cfg["analyses"]
    if an["leakage"]:
        rep["leakage"] = conventional_leakage(cfg, codec)
    if an["rd_sweep"]:
        rep["rd_sweep"] = _sweep(cfg)
    log.info("conventional pipeline finished in %.3f s", time.perf_counter() - start)
    return rep


def key_sweep(cfg: ExperimentConfig, codec) -> list[dict]:
    """Ensemble-mean conditional leakage for each ``N`` in ``leakage.key_grid``."""
    lk = cfg["leakage"]
    rows = []
    for N in lk["key_grid"]:
        res = best_cipher_search(cfg["cipher_kind"], int(N), codec, cfg.source, cfg.n, int(lk["ensemble_trials"]),
                              int(stream(cfg, f"ensemble/{N}").integers(2**63)), Delta=lk["Delta"],
                              delta=lk["delta"], pair_budget=int(cfg["budgets"]["pairs"]))
        rows.append({"N": int(N), "key_rate_nats": res.key_rate, "mean_nats": res.mean,
                     "std_error_nats": res.std_error, "min_nats": res.best_leakage, "trials": len(res.leakages)})
    return rows


def compare_systems(cfg: ExperimentConfig) -> dict:
    """Side-by-side rates, distortion and leakage of both systems under one config."""
    codec = build_codec(cfg)
    rev = run_reversed_pipeline(cfg, codec=codec)
    conv = run_conventional_pipeline(cfg, codec=codec)
    n, k = cfg.n, cfg.source.alphabet_size
    rows = []
    for rep in (conv, rev):
        lk = rep.get("leakage", {})
        if rep["system"] == "reversed":
            total = lk.get("total", {}).get("lhs_nats")
            given_type = lk.get("conditional_leakage_nats")
            type_info = lk.get("type_entropy_nats")
        else:
            total = lk.get("total_nats")
            given_type = lk.get("conditional_leakage_nats")
            type_info = 0.0 if lk else None
        rows.append({
            "system": rep["system"],
            "R_nats": rep["rates"]["R_nats"],
            "R_s_nats": rep["rates"]["R_s_nats"],
            "distortion": rep["distortion"]["mean"],
            "distortion_ci": rep["distortion"]["ci_half_width"],
            "leakage_total_nats": total,
            "leakage_given_type_nats": given_type,
            "type_entropy_nats": type_info,
            "type_entropy_bound_nats": type_info_bound(k, n),
        })
    out = {"config": cfg.to_dict(), "systems": rows}
    if cfg["leakage"]["ensemble_trials"] and cfg["leakage"]["key_grid"]:
        out["key_sweep"] = key_sweep(cfg, codec)
    return out


SYSTEMS = {"reversed": run_reversed_pipeline, "conventional": run_conventional_pipeline}

