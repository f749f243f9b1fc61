"""Command-line entry point.

    qcmd-langevin simulate --config run.json [--seed S] [--workers N] [--out DIR] [--format csv|json]
    qcmd-langevin converge --config sweep.json
    qcmd-langevin check {fdt,invariant,gibbs-consistency,adiabatic} --config check.json

Overrides apply with precedence flag > environment (``QCMD_SEED``,
``QCMD_WORKERS``, ``QCMD_OUT``, ``QCMD_FORMAT``) > config file.

Exit codes: 0 success or check passed, 1 config error, 2 invalid model,
3 numerical abort, 4 check failed, 5 check inconclusive.
"""

import argparse
import csv
import io
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import load_config, resolve
from .errors import (ConfigError, ContractViolation, GapViolationError, InternalConsistencyError,
                     ModelInvalidError, NotPSDError, QuadratureResolutionError, StepSizeError,
                     UnsupportedModelError)
from .harness import (CoupledBathLangevin, adiabatic_sweep, bath_from_config, convergence_sweep,
                      fdt_check, friction_from_config, gibbs_consistency_test, heavy_from_config,
                      matrix_from_config, run_ensemble, sample_values, weak_error)
from .langevin import GroundStateSurface, LangevinState, integrate_langevin, invariant_measure_check
from .rng import stream_rng

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_ABORT, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4, 5
STATUS_CODES = {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _manifest(out, cfg, command, workers, files):
    doc = {"command": command, "config_hash": cfg.digest(), "code_version": __version__,
           "seed_ledger": {"master_seed": cfg.seed},
           "workers": workers, "files": sorted(files),
           "timestamp": datetime.now(timezone.utc).isoformat(),
           "config": json.loads(cfg.canonical_json())}
    _write(os.path.join(out, "manifest.json"), json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=1, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def cmd_simulate(cfg, workers):
    out = cfg.output.dir
    os.makedirs(out, exist_ok=True)
    result = run_ensemble(cfg, workers)
    files = []
    if cfg.output.format == "json":
        _write(os.path.join(out, "result.json"), result.to_json() + "\n")
        files.append("result.json")
    else:
        _write(os.path.join(out, "result.csv"), result.to_csv())
        files.append("result.csv")
    if cfg.run.n_samples == 1:
        from .harness import simulate_sample
        times, X, p, pot = simulate_sample(cfg, 0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau"] + [f"X{k}" for k in range(X.shape[1])]
                   + [f"p{k}" for k in range(p.shape[1])])
        for t, x, q in zip(times, X, p):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in q])
        _write(os.path.join(out, "trajectory.csv"), buf.getvalue())
        files.append("trajectory.csv")
    _manifest(out, cfg, "simulate", workers, files)
    print(f"{result.n_samples} samples, {len(result.aborted)} aborted -> {out}")
    if result.partial:
        print(f"more than 1% of samples aborted: {result.aborted[:3]}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def _estimator(cfg, workers):
    if cfg.dynamics == "zwanzig":
        b = cfg.model.bath
        exp = CoupledBathLangevin(b.friction, b.reduced_cutoff, cfg.run.temperature, cfg.run.h,
                                  cfg.run.horizon, 8.0, tuple(cfg.run.X0), tuple(cfg.run.p0),
                                  heavy_from_config(cfg))
        return lambda M: exp.weak_error(M, cfg.run.n_samples, cfg.seed, cfg.run.batches)
    if cfg.dynamics == "ehrenfest":
        name = cfg.observables[0].name
        lang = cfg.with_updates(dynamics="langevin",
                                model={"friction": {**cfg.model.friction.model_dump(),
                                                    "kind": "ehrenfest"}})

        def est(M):
            a = sample_values(cfg, name, M, workers)
            b = sample_values(lang.with_updates(seed=cfg.seed + 1), name, M, workers)
            return weak_error(a, b, cfg.run.batches)
        return est
    raise ConfigError("dynamics: converge needs zwanzig or ehrenfest dynamics")


def cmd_converge(cfg, workers):
    if len(cfg.run.mass_ratios) < 3:
        raise ConfigError("run.mass_ratios: at least three values are required")
    out = cfg.output.dir
    os.makedirs(out, exist_ok=True)
    rep = convergence_sweep(cfg.run.mass_ratios, _estimator(cfg, workers))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["M", "error", "signed", "stderr", "ci_halfwidth", "inconclusive"])
    for r in rep.rows():
        w.writerow([repr(r["M"]), repr(r["error"]), repr(r["signed"]), repr(r["stderr"]),
                    repr(r["ci_halfwidth"]), r["inconclusive"]])
    _write(os.path.join(out, "convergence.csv"), buf.getvalue())
    _write(os.path.join(out, "convergence.json"), _json(rep.to_dict()))
    _manifest(out, cfg, "converge", workers, ["convergence.csv", "convergence.json"])
    for r in rep.rows():
        print(f"M={r['M']:.3g}  error={r['error']:.3e}  CI=+-{r['ci_halfwidth']:.2e}"
              + ("  (unresolved)" if r["inconclusive"] else ""))
    print(f"slope {rep.fit.slope:.3f} +- {rep.fit.slope_stderr:.3f}; "
          f"monotone={rep.monotone}; status={rep.status}")
    return EXIT_OK


def _check_invariant(cfg):
    fr = friction_from_config(cfg)
    pot = GroundStateSurface(matrix_from_config(cfg)) if fr.kind == "ehrenfest" \
        else heavy_from_config(cfg)
    dof = cfg.model.heavy.dof
    n = int(round(cfg.run.horizon / cfg.run.h))
    chains = cfg.run.n_samples
    X0 = np.tile(np.resize(np.asarray(cfg.run.X0, float), dof), (chains, 1))
    p0 = np.tile(np.resize(np.asarray(cfg.run.p0, float), dof), (chains, 1))
    rec = integrate_langevin(LangevinState(0.0, X0, p0), cfg.run.h, n, fr, pot,
                             stream_rng(cfg.seed, 0), max(cfg.run.stride, 1))
    burn = rec.X.shape[0] // 10
    X = np.swapaxes(rec.X[burn:], 0, 1).reshape(-1, dof)
    p = np.swapaxes(rec.p[burn:], 0, 1).reshape(-1, dof)
    r = invariant_measure_check(X, p, pot, cfg.run.temperature, n_batches=cfg.run.batches)
    return r.status, {"moments": r.moments, "ks": r.ks, **r.details}


def cmd_check(kind, cfg, workers):
    out = cfg.output.dir
    os.makedirs(out, exist_ok=True)
    if kind == "fdt":
        rep = fdt_check(bath_from_config(cfg), cfg.run.temperature, cfg.run.lags,
                        cfg.run.n_samples, cfg.seed, cfg.sampler.convention)
        status, summary = rep.status, rep.summary
    elif kind == "invariant":
        status, summary = _check_invariant(cfg)
    elif kind == "gibbs-consistency":
        dof = cfg.model.heavy.dof
        rep = gibbs_consistency_test(bath_from_config(cfg), heavy_from_config(cfg),
                                     cfg.run.temperature, np.resize(cfg.run.X0, dof),
                                     np.resize(cfg.run.p0, dof), cfg.run.h, cfg.run.horizon,
                                     cfg.run.n_samples, cfg.seed,
                                     cfg.sampler.temperature_factor, cfg.sampler.convention)
        status, summary = rep.status, rep.summary
    else:
        model = matrix_from_config(cfg)
        Ms = cfg.run.mass_ratios or [cfg.run.mass_ratio]
        dof = model.dof
        rep = adiabatic_sweep(model, Ms, np.resize(cfg.run.X0, dof), np.resize(cfg.run.p0, dof),
                              cfg.run.h, cfg.run.horizon, max(cfg.run.stride, 1))
        status, summary = rep.status, rep.summary
    _write(os.path.join(out, f"check-{kind}.json"), _json({"check": kind, "status": status,
                                                          **summary}))
    _manifest(out, cfg, f"check {kind}", workers, [f"check-{kind}.json"])
    print(f"check {kind}: {status}")
    return STATUS_CODES[status]


def build_parser():
    ap = argparse.ArgumentParser(prog="qcmd-langevin",
                                 description="Heat-bath, Ehrenfest and Langevin experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--workers", type=int, metavar="N")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--format", choices=["csv", "json"])

    common(sub.add_parser("simulate", help="run one configured ensemble"))
    common(sub.add_parser("converge", help="weak error against M and the fitted slope"))
    chk = sub.add_parser("check", help="pass/fail consistency checks")
    chk.add_argument("kind", choices=["fdt", "invariant", "gibbs-consistency", "adiabatic"])
    common(chk)
    return ap


def main(argv=None, environ=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        flags = {"seed": args.seed, "workers": args.workers, "out": args.out,
                 "format": args.format}
        cfg, workers = resolve(cfg, flags, environ)
        if args.command == "simulate":
            return cmd_simulate(cfg, workers)
        if args.command == "converge":
            return cmd_converge(cfg, workers)
        return cmd_check(args.kind, cfg, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelInvalidError, UnsupportedModelError, NotPSDError, ContractViolation) as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (StepSizeError, GapViolationError, InternalConsistencyError,
            QuadratureResolutionError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
