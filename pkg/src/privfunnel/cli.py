"""Command-line entry point.

Each subcommand builds a service request. Without ``--server`` the request
is handled in-process; with ``--server URL`` it is posted to a running
``privfunnel serve`` instance. Output formatting is the same either way.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings

from . import errors
from .dist import dump_distribution, load_distribution
from .errors import InputError, PrivacyFunnelError, exit_code_for
from .ingest import IngestSpec, ingest
from .service import ops
from .service.schemas import (
    Distribution,
    OracleRequest,
    OracleResponse,
    SolveRequest,
    SolveResponse,
    SolverOptions,
    SweepRequest,
    SweepResponse,
    ValidateResponse,
)
from .solver import TraceRecord
from .sweep import CurvePoint, curve_csv, curve_json


class RemoteError(Exception):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


def _split(cols: str) -> list[str]:
    return [c.strip() for c in cols.split(",") if c.strip()]


def load_input(args) -> Distribution:
    if args.dist and args.csv:
        raise InputError("give either --dist or --csv, not both")
    if args.dist:
        prior, channel = load_distribution(args.dist)
    elif args.csv:
        if not args.s_cols or not args.x_cols:
            raise InputError("--csv needs --s-cols and --x-cols")
        got = ingest(IngestSpec(args.csv, _split(args.s_cols), _split(args.x_cols), args.perturb, args.delimiter))
        prior, channel = got.prior, got.channel
    else:
        raise InputError("no input: pass --dist PATH or --csv PATH")
    return Distribution(p_x=prior.p.tolist(), p_s_given_x=channel.s.tolist())


def solver_options(args) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, obj_tol=args.tol, seed=args.seed,
                         init_mode=getattr(args, "init", "diag_like"))


def call(args, path, request, local, response_model):
    if not args.server:
        return local(request)
    import httpx

    url = args.server.rstrip("/") + path
    try:
        resp = httpx.post(url, json=request.model_dump(), timeout=None)
    except httpx.HTTPError as exc:
        raise RemoteError(f"cannot reach {url}: {exc}", errors.EXIT_INPUT) from None
    if resp.status_code == 200:
        return response_model.model_validate(resp.json())
    try:
        body = resp.json()
    except ValueError:
        body = {}
    detail = body.get("detail", resp.text)
    code = body.get("exit_code", errors.EXIT_INPUT if resp.status_code < 500 else errors.EXIT_GUARD)
    raise RemoteError(f"server error {resp.status_code}: {detail}", code)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_validate(args) -> int:
    res = call(args, "/validate", load_input(args), ops.run_validate, ValidateResponse)
    print(f"M = {res.m}, K = {res.k}")
    print(f"H(X) = {res.h_x:.12g} nats")
    print(f"I(S;X) = {res.i_sx:.12g} nats")
    return errors.EXIT_OK


def cmd_solve(args) -> int:
    dist = load_input(args)
    n = args.N if args.N is not None else len(dist.p_x)
    req = SolveRequest(distribution=dist, R=args.R, N=n, solver=solver_options(args),
                       include_trace=bool(args.trace))
    res = call(args, "/solve", req, ops.run_solve, SolveResponse)
    print(f"I(S;Y) = {res.i_sy:.12g}")
    print(f"I(X;Y) = {res.i_xy:.12g}")
    print(f"f~ = {res.objective:.12g}")
    print(f"lambda = {res.lam:.12g}")
    print(f"iterations = {res.iterations}")
    print(f"KKT residual max = {res.kkt.max:.3e}")
    if args.trace:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TraceRecord.FIELDS)
        for row in res.trace or []:
            d = row.model_dump()
            writer.writerow(["" if d[k] is None else d[k] for k in TraceRecord.FIELDS])
        _write(args.trace, buf.getvalue())
    if args.out:
        _write(args.out, json.dumps(res.model_dump(exclude={"trace"}), indent=1) + "\n")
    if not res.converged:
        print(f"not converged within {args.max_iter} iterations", file=sys.stderr)
        return errors.EXIT_NONCONVERGED
    if not res.feasible:
        print("final mapping misses the disclosure threshold", file=sys.stderr)
        return errors.EXIT_NONCONVERGED
    return errors.EXIT_OK


def cmd_sweep(args) -> int:
    dist = load_input(args)
    n = args.N if args.N is not None else len(dist.p_x)
    req = SweepRequest(distribution=dist, N=n, points=args.points, trials=args.trials, solver=solver_options(args),
                       include_trials=args.verbose)
    if args.verbose and not args.server:
        points = _local_sweep_with_traces(req)
        csv_text = curve_csv(points)
        detail = curve_json(points)
        unconverged = sum(not pt.converged for pt in points)
    else:
        res = call(args, "/sweep", req, ops.run_sweep, SweepResponse)
        points = [CurvePoint(p.r_target, _nan(p.i_xy), _nan(p.i_sy), p.best_trial, p.iters, p.converged)
                  for p in res.points]
        csv_text = curve_csv(points)
        detail = json.dumps([p.model_dump() for p in res.points], indent=1) if args.verbose else None
        unconverged = sum(not p.converged for p in res.points)
    _write(args.out, csv_text)
    if detail is not None:
        _write((args.out + ".json") if args.out and args.out != "-" else "sweep_trials.json", detail + "\n")
    if unconverged:
        print(f"{unconverged} of {len(points)} points did not converge", file=sys.stderr)
        return errors.EXIT_NONCONVERGED
    return errors.EXIT_OK


def _nan(x):
    return float("nan") if x is None else x


def _local_sweep_with_traces(req: SweepRequest):
    from .sweep import SweepConfig, sweep

    inst = ops.instance_for(req.distribution, req.N, 0.0)
    cfg = SweepConfig(num_points=req.points, trials=req.trials, solver=ops.solve_config(req.solver),
                      keep_traces=True)
    return sweep(inst, cfg)


def cmd_oracle(args) -> int:
    dist = load_input(args)
    n = args.N if args.N is not None else len(dist.p_x)
    req = OracleRequest(distribution=dist, R=args.R, N=n, step=args.step, trials=args.trials,
                        solver=solver_options(args))
    res = call(args, "/oracle", req, ops.run_oracle, OracleResponse)
    fmt = lambda x: "n/a" if x is None else f"{x:.12g}"  # noqa: E731
    print(f"grid points = {res.grid_points}")
    print(f"grid    I(S;Y) = {fmt(res.grid_i_sy)}  I(X;Y) = {fmt(res.grid_i_xy)}")
    print(f"AEM     I(S;Y) = {fmt(res.aem_i_sy)}  I(X;Y) = {fmt(res.aem_i_xy)}")
    print(f"AEM - grid = {fmt(res.difference)}")
    return errors.EXIT_OK if res.aem_converged else errors.EXIT_NONCONVERGED


def cmd_ingest(args) -> int:
    if not args.csv or not args.s_cols or not args.x_cols:
        raise InputError("ingest needs --csv, --s-cols and --x-cols")
    got = ingest(IngestSpec(args.csv, _split(args.s_cols), _split(args.x_cols), args.perturb, args.delimiter))
    text = dump_distribution(got.prior, got.channel,
                             s_alphabet=[list(v) for v in got.s_alphabet],
                             x_alphabet=[list(v) for v in got.x_alphabet])
    _write(args.out, text + "\n")
    print(f"K = {got.channel.k}, M = {got.prior.m}", file=sys.stderr)
    return errors.EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("privfunnel.service.app:app", host=args.host, port=args.port, log_level="info")
    return errors.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privfunnel", description="Discrete privacy-funnel solver (AEM).")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--dist", metavar="PATH", help="distribution JSON with p_x and p_s_given_x")
    inputs.add_argument("--csv", metavar="PATH", help="delimited data file with a header row")
    inputs.add_argument("--s-cols", help="comma-separated columns forming S")
    inputs.add_argument("--x-cols", help="comma-separated columns forming X")
    inputs.add_argument("--perturb", type=float, default=1e-3, help="added to each joint cell (default 1e-3)")
    inputs.add_argument("--delimiter", default=",")
    inputs.add_argument("--server", metavar="URL", help="send the request to a running service")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--N", type=int, help="codebook size |Y| (default |X|)")
    solver.add_argument("--max-iter", type=int, default=500)
    solver.add_argument("--tol", type=float, default=1e-10, help="objective-change stopping tolerance")
    solver.add_argument("--seed", type=int, default=0)
    solver.add_argument("--out", metavar="PATH")

    p = sub.add_parser("validate", parents=[inputs], help="check a distribution; print H(X) and I(S;X)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", parents=[inputs, solver], help="one AEM solve at threshold R")
    p.add_argument("--R", type=float, required=True, help="disclosure threshold in nats")
    p.add_argument("--init", choices=("diag_like", "random"), default="diag_like")
    p.add_argument("--trace", metavar="PATH", help="write the iteration trace as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[inputs, solver], help="privacy-funnel curve as CSV")
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("-v", "--verbose", action="store_true", help="also write per-trial JSON next to --out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", parents=[inputs, solver], help="grid search vs best-of-trials AEM")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("ingest", parents=[inputs], help="tabular data to distribution JSON")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except RemoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except PrivacyFunnelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return errors.EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
