"""Command-line interface.

Every subcommand is a thin client of the HTTP service: requests are
serialized to the same JSON schemas a remote client would use and
dispatched either to an in-process app instance (the default) or to a
running server given with --server.  File handling stays local.

Exit codes: 0 success, 2 bad input or configuration, 3 solver or
service failure, 4 figure requested for non-2d data.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from . import __version__
from .depth import DepthReport
from .errors import MKDepthError, SolverError
from .measures import load_csv, measure_from_json, save_csv
import numpy as np

_SOLVER_EXIT = 3
_INPUT_EXIT = 2
_FIGURE_DIM_EXIT = 4

_SOLVER_CODES = {
    "solver-failure",
    "numerical-failure",
    "max-iters-exceeded",
    "empty-cell-unrecoverable",
    "disconnected-slackness-graph",
}


class CliError(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code
        self.message = message


class ServiceClient:
    """Minimal JSON-over-HTTP client; in-process unless a server is given."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        if self.server:
            try:
                with httpx.Client(base_url=self.server, timeout=None) as client:
                    resp = client.post(path, json=payload)
            except httpx.HTTPError as exc:
                raise CliError(
                    _SOLVER_EXIT, f"error at stage connect: cannot reach {self.server}: {exc}"
                ) from exc
            return self._unwrap(resp)

        async def go():
            from .service.app import app

            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://mkdepth.internal", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return self._unwrap(asyncio.run(go()))

    @staticmethod
    def _unwrap(resp: httpx.Response) -> dict:
        if resp.status_code // 100 == 2:
            return resp.json()
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = None
        if isinstance(detail, dict) and "code" in detail:
            raise ServiceError(detail["code"], detail.get("message", ""), detail.get("stage", "?"))
        raise CliError(
            _INPUT_EXIT, f"error at stage request: service returned {resp.status_code}: {detail}"
        )


class ServiceError(Exception):
    def __init__(self, code: str, message: str, stage: str):
        super().__init__(message)
        self.code = code
        self.message = message
        self.stage = stage


def _parse_float_list(text, flag: str) -> list[float]:
    # accepts "0.25,0.5" or a list of such chunks from repeated flags
    chunks = text if isinstance(text, (list, tuple)) else [text]
    try:
        return [float(x) for t in chunks for x in str(t).split(",") if x.strip() != ""]
    except ValueError:
        raise CliError(_INPUT_EXIT, f"error at stage config: cannot parse {flag}={text!r}") from None


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise CliError(_INPUT_EXIT, f"error at stage config: cannot parse {flag}={text!r}") from None


def parse_reference(text: str, dim: int, seed: int) -> dict:
    """Parse --reference ball-grid:R,S | ball-mc:N | cube:N."""
    kind, _, rest = text.partition(":")
    if kind == "ball-grid":
        parts = _parse_int_list(rest, "--reference")
        if len(parts) != 2:
            raise CliError(_INPUT_EXIT, "error at stage config: ball-grid needs rings,spokes")
        return {"kind": "ball-grid", "rings": parts[0], "spokes": parts[1], "dim": 2, "seed": seed}
    if kind in ("ball-mc", "cube"):
        parts = _parse_int_list(rest, "--reference")
        if len(parts) != 1:
            raise CliError(_INPUT_EXIT, f"error at stage config: {kind} needs a single count")
        return {"kind": kind, "count": parts[0], "dim": dim, "seed": seed}
    raise CliError(
        _INPUT_EXIT,
        f"error at stage config: unknown reference {text!r}; use ball-grid:R,S, ball-mc:N or cube:N",
    )


def _family_parameters(args) -> dict:
    params = {}
    if getattr(args, "exponent", None) is not None:
        params["exponent"] = args.exponent
    if getattr(args, "low", None) is not None:
        params["low"] = args.low
    if getattr(args, "high", None) is not None:
        params["high"] = args.high
    return params


def _load_input_measure(args):
    try:
        return load_csv(args.input, weights_column=getattr(args, "weights_column", False))
    except FileNotFoundError:
        raise CliError(_INPUT_EXIT, f"error at stage input: no such file: {args.input}") from None
    except MKDepthError as exc:
        raise CliError(_INPUT_EXIT, f"error at stage input: {args.input}: {exc.message}") from exc


def _load_model_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(_INPUT_EXIT, f"error at stage input: no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(_INPUT_EXIT, f"error at stage input: {path}: invalid JSON: {exc}") from None


def _exit_for_service_error(command: str, err: ServiceError) -> CliError:
    if command == "figure" and err.code in ("unsupported-dimension", "dimension-mismatch"):
        code = _FIGURE_DIM_EXIT
    elif err.code in _SOLVER_CODES:
        code = _SOLVER_EXIT
    else:
        code = _INPUT_EXIT
    return CliError(code, f"error at stage {err.stage}: {err.message} [{err.code}]")


def cmd_sample(args, client: ServiceClient) -> int:
    payload = {
        "family": args.family,
        "n": args.n,
        "dim": args.dim,
        "seed": args.seed,
        "parameters": _family_parameters(args),
    }
    out = client.post("/sample", payload)
    measure = measure_from_json(out["measure"])
    save_csv(measure, args.output)
    print(f"wrote {measure.size} points to {args.output}")
    return 0


def cmd_fit(args, client: ServiceClient) -> int:
    data = _load_input_measure(args)
    from .measures import measure_to_json

    reference = parse_reference(args.reference, data.dim, args.seed)
    payload = {
        "data": measure_to_json(data),
        "reference": reference,
        "solver": args.solver,
        "tol_mass": args.tol_mass,
        "max_iters": args.max_iters,
        "store": False,
    }
    out = client.post("/fit", payload)
    with open(args.output, "w") as fh:
        json.dump(out["model"], fh)
        fh.write("\n")
    meta = out["metadata"]
    print(f"model {out['model_id']} -> {args.output}")
    print(f"solver={meta.get('solver')} objective={meta.get('objective')!r}")
    return 0


def cmd_depth(args, client: ServiceClient) -> int:
    model = _load_model_json(args.model)
    queries = _load_input_measure(args)
    payload = {"model": model, "queries": [[float(v) for v in p] for p in queries.points]}
    out = client.post("/depth", payload)
    reports = [
        DepthReport(
            query=np.asarray(r["query"]),
            vector_rank=np.asarray(r["vector_rank"]),
            scalar_rank=r["scalar_rank"],
            sign=np.asarray(r["sign"]),
            depth=r["depth"],
            extrapolated=r["extrapolated"],
        )
        for r in out["reports"]
    ]
    from .depth import reports_to_csv

    reports_to_csv(reports, args.output)
    print(f"wrote {len(reports)} depth reports to {args.output}")
    return 0


def cmd_contour(args, client: ServiceClient) -> int:
    model = _load_model_json(args.model)
    taus = _parse_float_list(args.tau, "--tau")
    if not taus:
        raise CliError(_INPUT_EXIT, "error at stage config: --tau needs at least one value")
    payload = {"model": model, "taus": taus, "spokes": args.spokes}
    out = client.post("/contour", payload)
    with open(args.output, "w", newline="") as fh:
        fh.write("# tau,coordinates (polyline order per tau)\n")
        for contour in out["contours"]:
            for p in contour["points"]:
                fh.write(",".join([repr(float(contour["tau"]))] + [repr(float(v)) for v in p]) + "\n")
    print(f"wrote {len(out['contours'])} contours to {args.output}")
    return 0


def cmd_converge(args, client: ServiceClient) -> int:
    band = _parse_float_list(args.band, "--band")
    if len(band) != 2:
        raise CliError(_INPUT_EXIT, "error at stage config: --band needs r_lo,r_hi")
    payload = {
        "family": args.family,
        "dim": args.dim,
        "parameters": _family_parameters(args),
        "sizes": _parse_int_list(args.sizes, "--sizes"),
        "seeds": _parse_int_list(args.seeds, "--seeds"),
        "band": band,
        "taus": _parse_float_list(args.tau if args.tau is not None else "0.5", "--tau"),
        "probe_count": args.probes,
    }
    out = client.post("/converge", payload)
    with open(args.output, "w", newline="") as fh:
        fh.write(f"# band={band[0]!r},{band[1]!r} probes={args.probes}\n")
        fh.write("# family,n,seed,tau,sup_error,hausdorff\n")
        for r in out["rows"]:
            fh.write(
                ",".join(
                    [
                        str(r["family"]),
                        str(r["n"]),
                        str(r["seed"]),
                        repr(float(r["tau"])),
                        repr(float(r["sup_error"])),
                        repr(float(r["hausdorff"])),
                    ]
                )
                + "\n"
            )
    print(f"wrote {len(out['rows'])} result rows to {args.output}")
    return 0


def cmd_figure(args, client: ServiceClient) -> int:
    model = _load_model_json(args.model)
    payload = {
        "model": model,
        "taus": _parse_float_list(args.tau, "--tau") if args.tau else None,
        "alpha": args.alpha,
        "spokes": args.spokes,
    }
    out = client.post("/figure", payload)
    with open(args.output, "w") as fh:
        fh.write(out["svg"])
    print(f"wrote figure to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkdepth",
        description="Transport-based multivariate depth, ranks and quantile contours.",
    )
    parser.add_argument("--version", action="version", version=f"mkdepth {__version__}")
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running service (default: run in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a synthetic sample to CSV")
    p.add_argument("--family", required=True,
                   help="banana | uniform-ball | elliptical-spherical | univariate-uniform")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exponent", type=float, default=None, help="radial CDF exponent")
    p.add_argument("--low", type=float, default=None)
    p.add_argument("--high", type=float, default=None)
    p.add_argument("--output", required=True)

    p = sub.add_parser("fit", help="fit a transport model from a CSV sample")
    p.add_argument("--input", required=True)
    p.add_argument("--weights-column", action="store_true",
                   help="last CSV column holds atom weights")
    p.add_argument("--reference", required=True,
                   help="ball-grid:R,S | ball-mc:N | cube:N")
    p.add_argument("--solver", choices=["assignment", "semidiscrete"], default="assignment")
    p.add_argument("--seed", type=int, default=0, help="seed for Monte-Carlo references")
    p.add_argument("--tol-mass", dest="tol_mass", type=float, default=1e-3)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=5000)
    p.add_argument("--output", required=True)

    p = sub.add_parser("depth", help="evaluate ranks and depth for query points")
    p.add_argument("--model", required=True, help="fitted model JSON")
    p.add_argument("--input", required=True, help="CSV of query points")
    p.add_argument("--output", required=True)

    p = sub.add_parser("contour", help="export quantile contours to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--tau", required=True, action="append",
                   help="comma-separated values in (0, 1]; may repeat")
    p.add_argument("--spokes", type=int, default=128)
    p.add_argument("--output", required=True)

    p = sub.add_parser("converge", help="convergence experiment against a closed-form family")
    p.add_argument("--family", required=True)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--exponent", type=float, default=None)
    p.add_argument("--low", type=float, default=None)
    p.add_argument("--high", type=float, default=None)
    p.add_argument("--sizes", required=True, help="comma-separated sample sizes")
    p.add_argument("--seeds", required=True, help="comma-separated seeds")
    p.add_argument("--band", required=True, help="r_lo,r_hi probe band")
    p.add_argument("--tau", default=None, action="append",
                   help="contour levels for Hausdorff stats (default 0.5); may repeat")
    p.add_argument("--probes", type=int, default=400)
    p.add_argument("--output", required=True)

    p = sub.add_parser("figure", help="render an SVG of the sample with contours")
    p.add_argument("--model", required=True)
    p.add_argument("--tau", default=None, action="append",
                   help="comma-separated contour levels (default: 11 evenly spaced); may repeat")
    p.add_argument("--alpha", type=float, default=0.3,
                   help="alpha-shape display smoothing; 0 disables")
    p.add_argument("--spokes", type=int, default=181)
    p.add_argument("--output", required=True)

    return parser


_DISPATCH = {
    "sample": cmd_sample,
    "fit": cmd_fit,
    "depth": cmd_depth,
    "contour": cmd_contour,
    "converge": cmd_converge,
    "figure": cmd_figure,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    client = ServiceClient(args.server)
    try:
        return _DISPATCH[args.command](args, client)
    except CliError as err:
        print(err.message, file=sys.stderr)
        return err.exit_code
    except ServiceError as err:
        cli_err = _exit_for_service_error(args.command, err)
        print(cli_err.message, file=sys.stderr)
        return cli_err.exit_code
    except MKDepthError as err:
        exit_code = _SOLVER_EXIT if isinstance(err, SolverError) else _INPUT_EXIT
        print(f"error at stage {args.command}: {err.message} [{err.code}]", file=sys.stderr)
        return exit_code
    except OSError as err:
        print(f"error at stage output: {err}", file=sys.stderr)
        return _INPUT_EXIT


if __name__ == "__main__":
    sys.exit(main())
