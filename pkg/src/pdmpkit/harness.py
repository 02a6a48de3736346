"""Monte Carlo experiments that cross-check the toolkit against itself.

Replications are keyed by (seed, replication index), so results are
reproducible bit for bit no matter how many workers share the run;
per-replication values are always reassembled in replication order
before aggregation.  Reports exclude wall-clock time from their
serialized form for the same reason.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AllExploded, BadParameters
from .flow import State, af_eval, flow_eval
from .generator import (TestFunction, constant_function, dynkin_process,
                        jump_variation)
from .models import ModelBundle, get_bundle
from .rng import AUXILIARY, UniformStream, replication_streams
from .simulate import EXPLODED, PdmpModel, Skeleton, path_state, simulate_skeleton
from .tilting import exp_martingale, reverse_martingale, tilt_model, tilted_generator

REL_FLOOR = 1e-12


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error and replication accounting."""

    mean: float
    stderr: float
    n: int
    excluded_exploded: int = 0

    @property
    def ci95(self):
        half = 1.96 * self.stderr
        return (self.mean - half, self.mean + half)


def _aggregate(values, n_total, excluded) -> Estimate:
    m = len(values)
    if m == 0:
        raise AllExploded(f"all {n_total} replications hit the jump guard")
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return Estimate(mean=mean, stderr=stderr, n=n_total,
                    excluded_exploded=excluded)


@dataclass
class ExperimentReport:
    """One experiment run: settings, estimates, verdicts, thresholds.

    Verdicts are recomputable from the stored estimates and thresholds.
    ``wall_time`` is informational and excluded from the serialized form.
    """

    experiment: str
    model: str
    params: dict
    settings: dict
    seed: int
    estimates: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        # worker count, like wall time, is an execution detail: two runs
        # that differ only in it serialize identically
        settings = {k: v for k, v in self.settings.items() if k != "workers"}
        out = {"experiment": self.experiment, "model": self.model,
               "params": self.params, "settings": settings,
               "seed": self.seed, "estimates": {}, "verdicts": dict(self.verdicts),
               "thresholds": dict(self.thresholds)}
        for name, est in self.estimates.items():
            if isinstance(est, Estimate):
                out["estimates"][name] = {
                    "mean": est.mean, "stderr": est.stderr,
                    "n": est.n, "excluded_exploded": est.excluded_exploded}
            else:
                out["estimates"][name] = est
        return out


# ---------------------------------------------------------------------------
# serialization with full float precision

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps_report(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  "{k}": {dumps_report(v, indent + 2)}' for k, v in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps_report(v, indent) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    text = str(obj).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{text}"'


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}.{k}" if prefix else str(k)
        if isinstance(v, dict):
            out.update(_flatten(v, key))
        else:
            out[key] = v
    return out


def report_to_csv(report: ExperimentReport) -> str:
    flat = _flatten(report.to_dict())
    cells = []
    for v in flat.values():
        if isinstance(v, bool):
            cells.append("true" if v else "false")
        elif isinstance(v, float):
            cells.append(format(v, ".17g"))
        elif isinstance(v, (list, tuple)):
            cells.append(";".join(str(u) for u in v))
        else:
            cells.append(str(v))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(flat))
    writer.writerow(cells)
    return buf.getvalue()


def write_report(report: ExperimentReport, path: str, fmt: str = "json") -> None:
    if fmt == "json":
        text = dumps_report(report.to_dict()) + "\n"
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# the generic estimator

def estimate(model: PdmpModel, functional: Callable[[Skeleton], float],
             x0: State, t_end: float, n: int, seed: int) -> Estimate:
    """Mean and standard error of a path functional over n replications.

    Exploded replications are excluded from the average and counted in
    the result.  Deterministic in (seed, n) alone.
    """
    if n < 2:
        raise BadParameters("need at least two replications")
    values = []
    excluded = 0
    for rep in range(n):
        sk = simulate_skeleton(model, x0, t_end, replication_streams(seed, rep))
        if sk.status == EXPLODED:
            excluded += 1
        else:
            values.append(functional(sk))
    return _aggregate(values, n, excluded)


# ---------------------------------------------------------------------------
# replication engines for the named experiments

def _resolve_h(bundle: ModelBundle, h) -> TestFunction:
    if h is None:
        return bundle.recommended_h
    if isinstance(h, str):
        return bundle.h_options[h]
    return h


def _resolve_f(bundle: ModelBundle, f) -> TestFunction:
    if f is None:
        return bundle.dynkin_f
    if isinstance(f, str):
        return bundle.h_options.get(f) or bundle.observables[f]
    return f


def _resolve_obs(bundle: ModelBundle, g):
    if g is None:
        return bundle.dynkin_f
    if isinstance(g, str):
        return bundle.observables.get(g) or bundle.h_options[g]
    return g


def _obs_value(g, skeleton, model, t) -> float:
    if isinstance(g, TestFunction):
        return g.value(path_state(skeleton, model, t))
    return g(skeleton, model, t)


def _rep_array(kind: str, bundle: ModelBundle, opts: dict, seed: int,
               lo: int, hi: int) -> np.ndarray:
    """Per-replication value rows for replications lo..hi-1."""
    model, x0 = bundle.model, bundle.x0
    t = opts["t"]
    if kind == "dynkin":
        h = _resolve_f(bundle, opts.get("f"))
    else:
        h = _resolve_h(bundle, opts.get("h"))
    g = _resolve_obs(bundle, opts.get("g")) if "g" in opts else None
    tilted = tilt_model(model, h) if kind in (
        "is-forward", "is-inverse", "reverse") else None
    rows = []
    for rep in range(lo, hi):
        if kind == "simulate":
            sk = simulate_skeleton(model, x0, t, replication_streams(seed, rep))
            final = path_state(sk, model, t)
            value = final.coords[0] if final.coords else float(final.label)
            rows.append((float(len(sk.events)), value,
                         1.0 if sk.status == EXPLODED else 0.0))
        elif kind == "martingale":
            sk = simulate_skeleton(model, x0, t, replication_streams(seed, rep))
            bad = sk.status == EXPLODED
            rows.append((0.0 if bad else exp_martingale(model, h, sk, t),
                         1.0 if bad else 0.0))
        elif kind == "dynkin":
            sk = simulate_skeleton(model, x0, t, replication_streams(seed, rep))
            bad = sk.status == EXPLODED
            rows.append((0.0 if bad else dynkin_process(model, h, sk, t),
                         1.0 if bad else 0.0,
                         0.0 if bad else jump_variation(model, h, sk, t)))
        elif kind == "is-forward":
            sk_t = simulate_skeleton(tilted, x0, t, replication_streams(seed, rep))
            sk_o = simulate_skeleton(model, x0, t, replication_streams(seed, rep))
            bad_t = sk_t.status == EXPLODED
            bad_o = sk_o.status == EXPLODED
            side_a = 0.0 if bad_t else _obs_value(g, sk_t, tilted, t)
            side_b = 0.0 if bad_o else (
                _obs_value(g, sk_o, model, t) * exp_martingale(model, h, sk_o, t))
            rows.append((side_a, side_b, 1.0 if bad_t else 0.0,
                         1.0 if bad_o else 0.0))
        elif kind == "is-inverse":
            sk_o = simulate_skeleton(model, x0, t, replication_streams(seed, rep))
            sk_t = simulate_skeleton(tilted, x0, t, replication_streams(seed, rep))
            bad_o = sk_o.status == EXPLODED
            bad_t = sk_t.status == EXPLODED
            crude = 0.0 if bad_o else _obs_value(g, sk_o, model, t)
            weighted = 0.0 if bad_t else (
                _obs_value(g, sk_t, tilted, t)
                * reverse_martingale(tilted, h, sk_t, t))
            rows.append((crude, weighted, 1.0 if bad_o else 0.0,
                         1.0 if bad_t else 0.0))
        elif kind == "reverse":
            sk = simulate_skeleton(model, x0, t, replication_streams(seed, rep))
            bad = sk.status == EXPLODED
            if bad:
                rows.append((0.0, 1.0))
            else:
                product = exp_martingale(model, h, sk, t) \
                    * reverse_martingale(tilted, h, sk, t)
                rows.append((abs(product - 1.0), 0.0))
        elif kind == "generator-forms":
            rows.append((_forms_deviation(bundle, h, g, t, seed, rep), 0.0))
        else:
            raise ValueError(f"unknown replication kind {kind!r}")
    return np.asarray(rows, dtype=float)


def _forms_deviation(bundle, h, f, t, seed, rep) -> float:
    """Max pairwise gap of the three tilted-generator routes on one path."""
    model = bundle.model
    sk = simulate_skeleton(model, bundle.x0, t, replication_streams(seed, rep))
    aux = UniformStream(seed, rep, AUXILIARY)
    starts = [sk.x0] + [ev.post for ev in sk.events]
    x = starts[int(aux.next() * len(starts)) % len(starts)]
    window = min(t, model.flow.horizon(x))
    t1 = 0.7 * window * aux.next()
    t2 = t1 + (window - t1) * max(aux.next(), 1e-3)
    base = flow_eval(model.flow, x, t1)
    forms = [tilted_generator(model, h, f, form)
             for form in ("direct", "ratio", "bracket")]
    vals = [af_eval(fm, model.flow, base, t2 - t1) for fm in forms]
    dev = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            scale = max(abs(vals[i]), abs(vals[j]), REL_FLOOR)
            dev = max(dev, abs(vals[i] - vals[j]) / scale)
    return dev


def _chunk_task(name, params, kind, opts, seed, lo, hi):
    bundle = get_bundle(name, **params)
    return _rep_array(kind, bundle, opts, seed, lo, hi)


def _collect(kind, bundle, opts, n, seed, workers) -> np.ndarray:
    if workers <= 1:
        return _rep_array(kind, bundle, opts, seed, 0, n)
    for key in ("h", "g", "f"):
        if key in opts and opts[key] is not None and not isinstance(opts[key], str):
            raise BadParameters(
                f"parallel runs need {key} given by name, got {type(opts[key])}")
    bounds = [(i * n) // workers for i in range(workers)] + [n]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_chunk_task, bundle.name, bundle.params,
                               kind, opts, seed, lo, hi)
                   for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        chunks = [f.result() for f in futures]
    return np.vstack(chunks)


def _split_exploded(arr):
    values = arr[:, 0]
    mask = arr[:, 1] == 0.0
    return values[mask].tolist(), int((~mask).sum())


# ---------------------------------------------------------------------------
# named experiments

def experiment_martingale_check(bundle: ModelBundle, h=None, t: float = 1.0,
                                n: int = 10000, seed: int = 0,
                                workers: int = 1) -> ExperimentReport:
    """Sample mean of the likelihood ratio; the target is exactly one."""
    start = time.perf_counter()
    opts = {"h": h, "t": t}
    arr = _collect("martingale", bundle, opts, n, seed, workers)
    values, excluded = _split_exploded(arr)
    est = _aggregate(values, n, excluded)
    gap = abs(est.mean - 1.0)
    report = ExperimentReport(
        experiment="martingale-check", model=bundle.name, params=bundle.params,
        settings={"h": h if isinstance(h, str) else "recommended" if h is None else "custom",
                  "t": t, "n": n, "workers": workers},
        seed=seed,
        estimates={"martingale_mean": est, "abs_gap": gap},
        verdicts={"mean_is_one": gap <= 3.0 * est.stderr},
        thresholds={"mean_is_one": 3.0 * est.stderr},
        wall_time=time.perf_counter() - start)
    if bundle.oracle is not None:
        h_fn = _resolve_h(bundle, h)
        oracle_value = bundle.oracle(h_fn, constant_function(1.0), t)
        report.estimates["oracle_value"] = oracle_value
        report.verdicts["oracle_is_one"] = abs(oracle_value - 1.0) <= 1e-9
        report.thresholds["oracle_is_one"] = 1e-9
    return report


def experiment_dynkin_check(bundle: ModelBundle, f=None, t: float = 1.0,
                            n: int = 10000, seed: int = 0,
                            workers: int = 1) -> ExperimentReport:
    """Mean preservation of f minus its accumulated generator."""
    start = time.perf_counter()
    f_fn = _resolve_f(bundle, f)
    arr = _collect("dynkin", bundle, {"f": f, "t": t}, n, seed, workers)
    values, excluded = _split_exploded(arr)
    est = _aggregate(values, n, excluded)
    # reported, no verdict: summability of the path jumps of f cannot be
    # decided from a sample, only sized
    variation = _aggregate(arr[arr[:, 1] == 0.0, 2].tolist(), n, excluded)
    target = f_fn.value(bundle.x0)
    gap = abs(est.mean - target)
    return ExperimentReport(
        experiment="dynkin-check", model=bundle.name, params=bundle.params,
        settings={"f": f if isinstance(f, str) else "default" if f is None else "custom",
                  "t": t, "n": n, "workers": workers},
        seed=seed,
        estimates={"dynkin_mean": est, "target": target, "abs_gap": gap,
                   "jump_variation": variation},
        verdicts={"mean_preserved": gap <= 3.0 * est.stderr},
        thresholds={"mean_preserved": 3.0 * est.stderr},
        wall_time=time.perf_counter() - start)


def experiment_is_consistency(bundle: ModelBundle, h=None, g=None,
                              t: float = 1.0, n: int = 10000, seed: int = 0,
                              workers: int = 1,
                              direction: str = "tilted") -> ExperimentReport:
    """Direct simulation under one measure versus reweighting the other.

    direction "tilted": tilted-measure mean of g, directly vs weighted
    by the likelihood ratio under the original measure.  direction
    "original": original-measure mean of g, crude vs importance-weighted
    tilted simulation.
    """
    if direction not in ("tilted", "original"):
        raise ValueError(f"unknown direction {direction!r}")
    start = time.perf_counter()
    kind = "is-forward" if direction == "tilted" else "is-inverse"
    arr = _collect(kind, bundle, {"h": h, "g": g, "t": t}, n, seed, workers)
    a_vals = arr[arr[:, 2] == 0.0, 0].tolist()
    b_vals = arr[arr[:, 3] == 0.0, 1].tolist()
    est_a = _aggregate(a_vals, n, int((arr[:, 2] != 0.0).sum()))
    est_b = _aggregate(b_vals, n, int((arr[:, 3] != 0.0).sum()))
    combined = math.sqrt(est_a.stderr ** 2 + est_b.stderr ** 2)
    gap = abs(est_a.mean - est_b.mean)
    names = (("tilted_direct", "original_weighted") if direction == "tilted"
             else ("crude", "tilted_weighted"))
    return ExperimentReport(
        experiment="is-consistency", model=bundle.name, params=bundle.params,
        settings={"h": h if isinstance(h, str) else "recommended" if h is None else "custom",
                  "g": g if isinstance(g, str) else "default" if g is None else "custom",
                  "t": t, "n": n, "workers": workers, "direction": direction},
        seed=seed,
        estimates={names[0]: est_a, names[1]: est_b, "abs_gap": gap,
                   "combined_stderr": combined},
        verdicts={"sides_agree": gap <= 3.0 * combined},
        thresholds={"sides_agree": 3.0 * combined},
        wall_time=time.perf_counter() - start)


def experiment_reverse_check(bundle: ModelBundle, h=None, t: float = 1.0,
                             n: int = 10000, seed: int = 0,
                             workers: int = 1,
                             max_dev: float = 1e-6) -> ExperimentReport:
    """Pathwise product of forward and reverse likelihood ratios is one."""
    start = time.perf_counter()
    arr = _collect("reverse", bundle, {"h": h, "t": t}, n, seed, workers)
    devs, excluded = _split_exploded(arr)
    est = _aggregate(devs, n, excluded)
    worst = max(devs) if devs else math.inf
    return ExperimentReport(
        experiment="reverse-check", model=bundle.name, params=bundle.params,
        settings={"h": h if isinstance(h, str) else "recommended" if h is None else "custom",
                  "t": t, "n": n, "workers": workers},
        seed=seed,
        estimates={"mean_abs_dev": est, "max_abs_dev": worst},
        verdicts={"pathwise_inverse": worst < max_dev},
        thresholds={"pathwise_inverse": max_dev},
        wall_time=time.perf_counter() - start)


def experiment_generator_forms(bundle: ModelBundle, h=None, f=None,
                               t: float = 1.0, n: int = 100, seed: int = 0,
                               workers: int = 1,
                               max_rel: float = 1e-8) -> ExperimentReport:
    """All three tilted-generator routes agree as interval measures."""
    start = time.perf_counter()
    arr = _collect("generator-forms", bundle, {"h": h, "g": f, "t": t},
                   n, seed, workers)
    devs = arr[:, 0].tolist()
    est = _aggregate(devs, n, 0)
    worst = max(devs)
    return ExperimentReport(
        experiment="generator-forms", model=bundle.name, params=bundle.params,
        settings={"h": h if isinstance(h, str) else "recommended" if h is None else "custom",
                  "f": f if isinstance(f, str) else "default" if f is None else "custom",
                  "t": t, "n": n, "workers": workers},
        seed=seed,
        estimates={"mean_rel_dev": est, "max_rel_dev": worst},
        verdicts={"forms_agree": worst <= max_rel},
        thresholds={"forms_agree": max_rel},
        wall_time=time.perf_counter() - start)


def experiment_simulate(bundle: ModelBundle, t: float = 1.0, n: int = 1000,
                        seed: int = 0, workers: int = 1) -> ExperimentReport:
    """Plain simulation summary: jump counts and terminal values."""
    start = time.perf_counter()
    arr = _collect("simulate", bundle, {"t": t}, n, seed, workers)
    mask = arr[:, 2] == 0.0
    excluded = int((~mask).sum())
    counts = _aggregate(arr[mask, 0].tolist(), n, excluded)
    finals = _aggregate(arr[mask, 1].tolist(), n, excluded)
    return ExperimentReport(
        experiment="simulate", model=bundle.name, params=bundle.params,
        settings={"t": t, "n": n, "workers": workers},
        seed=seed,
        estimates={"jump_count": counts, "terminal_value": finals},
        verdicts={"completed": excluded < n},
        thresholds={"completed": float(n)},
        wall_time=time.perf_counter() - start)


EXPERIMENTS = {
    "simulate": experiment_simulate,
    "martingale-check": experiment_martingale_check,
    "dynkin-check": experiment_dynkin_check,
    "is-consistency": experiment_is_consistency,
    "reverse-check": experiment_reverse_check,
    "generator-forms": experiment_generator_forms,
}
