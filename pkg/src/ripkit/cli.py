"""Command-line entry point: ``ripkit <command> [options]``.

Every command prints a JSON envelope ``{schema_version, manifest, result}`` on
stdout.  Exit status is 0 on success, 1 when a check fails (the report is
still written) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, config
from . import audit, bench, construct, expander, recover, ripcheck, tails
from .matrix import SparseBinaryMatrix, as_csc, load_matrix
from .parallel import ENV_THREADS

SCHEMA_VERSION = 1


class CheckFailed(Exception):
    """Raised by a handler that produced a report whose check failed."""

    def __init__(self, result):
        super().__init__("check failed")
        self.result = result


# -- JSON helpers --------------------------------------------------------------------


def jsonable(obj):
    """Convert reports, arrays and non-finite floats into plain JSON values."""
    if hasattr(obj, "to_json_dict"):
        return jsonable(obj.to_json_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return [jsonable(v) for v in sorted(obj)]
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def _payload(path) -> object:
    """JSON file content, unwrapping a CLI envelope if present."""
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, dict) and "result" in obj and "schema_version" in obj:
        return obj["result"]
    return obj


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _vector(path) -> np.ndarray:
    obj = _payload(path)
    if isinstance(obj, dict):
        raise ValueError(f"{path} does not hold a plain vector")
    return np.asarray(obj, dtype=float)


def _matrix(args):
    return load_matrix(args.matrix)


# -- handlers ------------------------------------------------------------------------


def cmd_plan(args):
    plan = construct.plan_params(args.n, args.k, args.p, args.eps, tau=args.tau)
    if args.output:
        Path(args.output).write_text(plan.dumps())
        args._outputs.append(args.output)
    return plan


def cmd_generate(args):
    if args.plan:
        plan = construct.ParamPlan.from_json_dict(_payload(args.plan))
        n, m, d, p = plan.n, plan.m, plan.d, plan.p
    else:
        if None in (args.n, args.m, args.d, args.p):
            raise ValueError("generate needs --plan or all of --n --m --d --p")
        n, m, d, p = args.n, args.m, args.d, args.p
    A = construct.gen_matrix(n, m, d, p, args.seed)
    out = {"n": n, "m": m, "d": d, "p": p, "seed": args.seed}
    if args.output:
        A.save(args.output)
        args._outputs.append(args.output)
        out["path"] = args.output
    else:
        out["matrix"] = A.to_json_dict()
    if args.csv:
        A.write_csv(args.csv)
        args._outputs.append(args.csv)
    return out


def cmd_incoherence(args):
    rep = construct.check_incoherence(_matrix(args), args.k, args.eps)
    return _verdict(rep, rep.passed)


def cmd_expander_verify(args):
    rep = expander.verify_expander_exact(_matrix(args), args.ell, args.delta, budget=args.budget)
    return _verdict(rep, rep.passed)


def cmd_expander_falsify(args):
    wit = expander.falsify_expander_heuristic(_matrix(args), args.ell, args.delta,
                                              budget=args.budget, seed=args.seed)
    out = {"ell": args.ell, "delta": args.delta, "witness": None if wit is None else list(wit),
           "passed": wit is None}
    return _verdict(out, wit is None)


def cmd_rip_check(args):
    A = _matrix(args)
    opts = ripcheck.SearchOpts(restarts=args.restarts, iters=args.iters, seed=args.seed)
    if args.support:
        S = _ints(args.support)
        if args.mode == "oracle":
            res = ripcheck.brute_oracle(A, S, args.p, grid_res=args.grid_res)
        elif args.mode == "certified":
            res = ripcheck.certified_estimate(A, S, args.p)
        else:
            res = ripcheck.rip_on_support(A, S, args.p, opts)
        lo, hi = res.hi_min, res.lo_max
    else:
        if args.k is None:
            raise ValueError("rip check needs --k or --support")
        if args.mode == "oracle":
            raise ValueError("--mode oracle needs an explicit --support")
        res = ripcheck.rip_sampled(A, args.k, args.p, args.num_supports, opts, seed=args.seed,
                                   mode=args.mode)
        lo, hi = res.worst_min, res.worst_max
        if args.mode == "certified":
            lo, hi = res.certified_min, res.certified_max
    out = {"estimate": res}
    if args.eps is None:
        return out
    ok = lo**args.p >= 1 - args.eps and hi**args.p <= 1 + args.eps
    out["eps"] = args.eps
    out["passed"] = ok
    return _verdict(out, ok)


def cmd_tails_loads(args):
    fn = tails.sample_iid_loads if args.iid else tails.sample_row_loads
    X = fn(args.m, args.d, args.k, args.p, args.seed, args.trials)
    q = np.quantile(X, [0.5, 0.9, 0.99, 0.999])
    return {"m": args.m, "d": args.d, "k": args.k, "p": args.p, "trials": args.trials,
            "iid": args.iid, "mean": float(X.mean()), "std": float(X.std(ddof=1)) if X.size > 1 else 0.0,
            "max": float(X.max()), "quantiles": dict(zip(["0.5", "0.9", "0.99", "0.999"], q.tolist()))}


def cmd_tails_moment(args):
    row = tails.check_single_moment_bound(args.k, args.delta, args.p, args.ell, args.trials,
                                          C=args.C, seed=args.seed)
    return _verdict(row, row.passed)


def cmd_tails_na(args):
    rep = tails.check_negative_association(args.m, args.d, args.k, args.p, args.t, args.trials,
                                           seed=args.seed)
    return _verdict(rep, rep.passed)


def cmd_tails_latala(args):
    if args.constant is not None:
        return {"c": args.constant, "d": args.d, "bound": tails.latala_constant(args.constant, args.d)}
    if args.values is None:
        raise ValueError("tails latala needs --values or --constant")
    vals = _floats(args.values)
    w = _floats(args.weights) if args.weights else None
    return {"values": vals, "weights": w, "d": args.d, "t": args.t,
            "bound": tails.latala_bound(vals, args.d, args.t, weights=w)}


def cmd_tails_tail(args):
    rep = tails.tail_probability_check(args.m, args.d, args.k, args.p, args.eps, args.trials,
                                       seed=args.seed)
    return _verdict(rep, rep.passed)


_AUDITS = {"columns": audit.audit_column_pnorms, "rows": audit.audit_row_order_stats,
           "frobenius": audit.audit_frobenius, "sparsity": audit.check_sparsity}


def cmd_audit_matrix(args):
    A = _matrix(args)
    name = args.audit_cmd
    if args.D is not None:
        fn = _AUDITS[name]
        res = fn(A, args.p, args.D) if name == "columns" else fn(A, args.p, args.D, _need_k(args))
        return _verdict(res, res.passed)
    rep = audit.audit_lower_bounds(A, args.p, _need_k(args), num_supports=args.num_supports,
                                   seed=args.seed)
    res = next(r for r in rep.results if r.name == name)
    ok = rep.lower_isometry and res.passed
    return _verdict({"measured": {"D": rep.D, "scale": rep.scale, "lower_isometry": rep.lower_isometry},
                     "audit": res, "passed": ok}, ok)


def _need_k(args):
    if args.k is None:
        raise ValueError("this audit needs --k")
    return args.k


def cmd_audit_dimension(args):
    db = audit.dimension_bound(args.n, args.k, args.p, args.D)
    out = {"bound": db}
    if args.m is None:
        return out
    ok = args.m >= db.m_min
    out.update(m=args.m, passed=ok)
    return _verdict(out, ok)


def cmd_audit_scalar(args):
    rep = audit.scalar_inequality_test(args.samples, seed=args.seed, C=args.C)
    return _verdict(rep, rep.violations == 0)


def cmd_audit_holder(args):
    rep = audit.holder_inequality_test(args.samples, seed=args.seed)
    return _verdict(rep, rep.violations == 0)


def cmd_audit_integral(args):
    rep = audit.integral_sum_check(args.k, args.ell, args.p, args.constant)
    return _verdict(rep, rep.passed)


def synthetic_instance(A, k: int, p: float, noise: float, seed: int):
    """Gaussian ``k``-sparse signal and a noise vector of p-norm ``noise``."""
    from ._rng import stream

    C = as_csc(A)
    m, n = C.shape
    rng = stream(seed, 11)
    x = np.zeros(n)
    S = rng.choice(n, size=k, replace=False)
    x[S] = rng.standard_normal(k)
    e = rng.standard_normal(m)
    e = e * (noise / recover.pnorm(e, p)) if noise > 0 else np.zeros(m)
    return x, C @ x + e


def cmd_recover(args):
    A = _matrix(args)
    x = None
    if args.synthetic:
        if args.y:
            raise ValueError("--synthetic and --y are exclusive")
        x, y = synthetic_instance(A, args.k, args.p, args.noise, args.seed)
        eps = args.eps if args.eps is not None else args.noise
    else:
        if not args.y or args.eps is None:
            raise ValueError("recover needs --y and --eps (or --synthetic)")
        y, eps = _vector(args.y), args.eps
        if args.x:
            x = _vector(args.x)
    prob = recover.RecoveryProblem(A, y, args.p, eps, args.k)
    res = recover.l1_minimize(prob, recover.SolverOpts(max_iter=args.max_iter, tol=args.tol,
                                                       seed=args.seed))
    ok = res.converged
    out = {"result": res, "eps": eps}
    if x is not None:
        g = recover.check_guarantee(x, res.x_hat, args.k, args.p, eps)
        claims = recover.audit_recovery_claims(x, res.x_hat, A, y, eps, args.k, p=args.p,
                                               rip="auto" if isinstance(A, SparseBinaryMatrix) else None)
        res = dataclasses.replace(res, claim_ledger=claims)
        out.update(result=res, guarantee=g, error_p=recover.pnorm(x - res.x_hat, args.p))
        ok = ok and g.passed and all(c.passed for c in claims if c.applicable)
    if args.output:
        Path(args.output).write_text(json.dumps(jsonable(
            {"x": x, "y": y, "x_hat": res.x_hat, "eps": eps, "p": args.p, "k": args.k})))
        args._outputs.append(args.output)
    out["passed"] = ok
    return _verdict(out, ok)


def cmd_rip_from_recovery(args):
    res = recover.rip_from_recovery(_matrix(args), None, args.k, args.p, trials=args.trials,
                                    seed=args.seed)
    return _verdict(res, res.finite)


def cmd_bench_phase(args):
    pts = bench.phase_transition(args.n, args.p, args.eps, _ints(args.k_list), args.d_rule,
                                 args.threshold, args.trials, args.seed,
                                 num_supports=args.num_supports)
    if args.csv:
        bench.write_csv(pts, args.csv)
        args._outputs.append(args.csv)
    ok = not any(pt.exhausted for pt in pts)
    return _verdict({"points": pts, "passed": ok}, ok)


def cmd_bench_fit(args):
    pts = [pt for pt in bench.read_csv(args.csv) if pt.k >= args.k_min]
    return bench.fit_exponent(pts)


def _verdict(result, ok: bool):
    if not ok:
        raise CheckFailed(result)
    return result


# -- parser --------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    # global flags are accepted both before and after the subcommand
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root RNG seed")
    c.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="cap on worker threads")
    c.add_argument("--config", default=argparse.SUPPRESS, help="JSON file overriding constants")
    c.add_argument("--manifest", default=argparse.SUPPRESS, help="also write the run manifest here")
    c.add_argument("-o", "--output", default=argparse.SUPPRESS, help="output artifact path")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="ripkit", description=__doc__.splitlines()[0],
                                 parents=[common])
    ap.add_argument("--version", action="version", version=f"ripkit {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add(parent, name, fn, help_):
        p = parent.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    def matrix_arg(p):
        p.add_argument("--matrix", required=True, help="matrix JSON file")

    p = add(sub, "plan", cmd_plan, "plan (m, d, ell, delta) for (n, k, p, eps)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--tau", type=float, default=0.05)

    p = add(sub, "generate", cmd_generate, "sample a sparse binary matrix")
    p.add_argument("--plan")
    for name, typ in (("n", int), ("m", int), ("d", int), ("p", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--csv", help="also export (row, col, value) CSV")

    p = add(sub, "incoherence", cmd_incoherence, "pairwise support overlap check")
    matrix_arg(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)

    ex = add(sub, "expander", None, "expansion certification").add_subparsers(dest="expander_cmd",
                                                                              required=True)
    for name, fn, budget in (("verify", cmd_expander_verify, 10_000_000),
                             ("falsify", cmd_expander_falsify, 10_000)):
        p = add(ex, name, fn, f"{name} (ell, d, delta)-expansion")
        matrix_arg(p)
        p.add_argument("--ell", type=int, required=True)
        p.add_argument("--delta", type=float, required=True)
        p.add_argument("--budget", type=int, default=budget)

    rp = add(sub, "rip", None, "RIP-p estimation").add_subparsers(dest="rip_cmd", required=True)
    p = add(rp, "check", cmd_rip_check, "estimate RIP extrema")
    matrix_arg(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--support", help="comma-separated column indices")
    p.add_argument("--mode", choices=("heuristic", "certified", "oracle"), default="heuristic")
    p.add_argument("--num-supports", "--supports", dest="num_supports", type=int, default=100)
    p.add_argument("--restarts", type=int, default=200)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--grid-res", type=int, default=256)
    p.add_argument("--eps", type=float, help="pass iff ratios^p lie in [1-eps, 1+eps]")

    tl = add(sub, "tails", None, "Monte-Carlo tail and moment checks").add_subparsers(
        dest="tails_cmd", required=True)
    p = add(tl, "loads", cmd_tails_loads, "sample per-row load summands")
    for name in ("m", "d", "k"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--iid", action="store_true", help="independent-coordinate comparison model")
    p = add(tl, "moment", cmd_tails_moment, "single-summand moment bound")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--ell", type=float, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--C", type=float)
    p = add(tl, "na", cmd_tails_na, "negative association moment comparison")
    for name in ("m", "d", "k", "t"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p = add(tl, "latala", cmd_tails_latala, "moment bound for sums of iid nonnegative variables")
    p.add_argument("--values", help="comma-separated support of Y")
    p.add_argument("--weights", help="comma-separated probabilities for --values")
    p.add_argument("--constant", type=float, help="Y identically equal to this constant")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--t", type=float, default=1.0)
    p = add(tl, "tail", cmd_tails_tail, "tail probability of the p-th power sum")
    for name in ("m", "d", "k"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--trials", type=int)

    au = add(sub, "audit", None, "lower-bound audits and scalar inequalities").add_subparsers(
        dest="audit_cmd", required=True)
    for name in ("columns", "rows", "frobenius", "sparsity"):
        p = add(au, name, cmd_audit_matrix, f"{name} audit (measured distortion unless --D)")
        matrix_arg(p)
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--k", type=int)
        p.add_argument("--D", type=float)
        p.add_argument("--num-supports", type=int, default=200)
    p = add(au, "dimension", cmd_audit_dimension, "row-count lower bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--m", type=int, help="compare this row count against the bound")
    p = add(au, "scalar", cmd_audit_scalar, "scalar p-th power inequality")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--C", type=float, default=3.0)
    p = add(au, "holder", cmd_audit_holder, "Holder-type corollary")
    p.add_argument("--samples", type=int, default=100_000)
    p = add(au, "integral", cmd_audit_integral, "integral-sum comparison")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--constant", type=float)

    p = add(sub, "recover", cmd_recover, "l1 minimization subject to a p-norm residual ball")
    matrix_arg(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--y", "--sketch", dest="y", help="measurement vector JSON")
    p.add_argument("--x", help="ground-truth signal JSON (enables guarantee and claim audits)")
    p.add_argument("--synthetic", action="store_true", help="draw a k-sparse signal and noise")
    p.add_argument("--noise", type=float, default=0.0, help="p-norm of synthetic noise")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)

    p = add(sub, "rip-from-recovery", cmd_rip_from_recovery, "lower isometry from a decoder")
    matrix_arg(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trials", type=int, default=1000)

    bn = add(sub, "bench", None, "phase-transition sweeps").add_subparsers(dest="bench_cmd",
                                                                            required=True)
    p = add(bn, "phase", cmd_bench_phase, "search m_star for each k")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--k-list", required=True, help="comma-separated k values")
    p.add_argument("--d-rule", choices=("plan", "power"), default="plan")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--num-supports", type=int, default=32)
    p.add_argument("--csv", help="write points as CSV")
    p = add(bn, "fit", cmd_bench_fit, "log-log slope of m_star against k")
    p.add_argument("--csv", required=True)
    p.add_argument("--k-min", type=int, default=2)
    return ap


_INPUT_FLAGS = ("matrix", "plan", "y", "x", "config")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    for name, default in (("seed", 0), ("threads", None), ("config", None), ("manifest", None),
                          ("output", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.fn is None:
        ap.error("missing subcommand")
    args._outputs = []
    record = {k: v for k, v in vars(args).items() if k not in ("fn", "_outputs")}
    command = " ".join(str(v) for k, v in record.items() if k == "cmd" or k.endswith("_cmd"))
    inputs = {}
    t0 = time.perf_counter()
    status, result = 0, None
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ValueError("--threads must be positive")
            os.environ[ENV_THREADS] = str(args.threads)
        config.use_constants(args.config)
        for flag in _INPUT_FLAGS:
            path = getattr(args, flag, None)
            if flag != "config" and path is None:
                continue
            if path is not None:
                inputs[path] = _digest(path)
        result = args.fn(args)
    except CheckFailed as exc:
        status, result = 1, exc.result
    except (ValueError, KeyError, OSError, tails.HypothesisViolation,
            expander.ExpansionBudgetError) as exc:
        print(f"ripkit: error: {exc}", file=sys.stderr)
        ap.print_usage(sys.stderr)
        return 2
    finally:
        config.use_constants(None)
    manifest = {"command": command, "args": jsonable(record), "seed": args.seed,
                "version": __version__, "inputs": inputs,
                "outputs": {p: _digest(p) for p in args._outputs},
                "wall_time": time.perf_counter() - t0}
    envelope = {"schema_version": SCHEMA_VERSION, "manifest": manifest, "result": jsonable(result)}
    text = json.dumps(envelope, indent=2, sort_keys=True)
    print(text)
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    if status:
        print(f"ripkit: {command}: check failed", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
