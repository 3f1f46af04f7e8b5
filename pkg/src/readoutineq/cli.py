"""Command-line driver.

The CLI is a thin client of the service layer: flags are parsed into the
same request models the HTTP endpoints accept, handled in-process by
default, or sent to a running server with ``--server``.  A JSON config file
may supply any flag; explicit flags win.  The default seed may come from the
``READOUTINEQ_SEED`` environment variable and is always echoed in the
output.

Exit codes: 0 success, 2 configuration error, 3 numerical/transport failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from pydantic import BaseModel, ValidationError

from .errors import ConfigError, NumericalInstabilityError
from .montecarlo import LandscapeCell, grid_to_csv
from .service import handlers
from .service.models import (
    AnalyzeRequest,
    AnalyzeResponse,
    LandscapeRequest,
    LandscapeResponse,
    MonteCarloRequest,
    MonteCarloResponse,
    SenmCheckRequest,
    SenmCheckResponse,
)

SEED_ENV_VAR = "READOUTINEQ_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _problem_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("problem scale (give exactly one)")
    group.add_argument("--gamma", type=float, help="theta = sqrt(10^-gamma)")
    group.add_argument("--theta", type=float, help="rotation angle per iteration")
    group.add_argument("--p0", type=float, help="initial success probability")
    parser.add_argument("--phi", type=float, help="reflection phase (default pi)")
    parser.add_argument("--phi-tau", dest="phi_tau", type=float, help="oracle phase (default pi)")


def _io_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file supplying any flag")
    parser.add_argument("--server", help="base URL of a running service instance")
    parser.add_argument("--out", type=Path, help="write JSON (or CSV for landscape) here")
    parser.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV_VAR})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="readoutineq",
        description="Readout-inequality tests for amplitude amplification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="exact closed-form inequality evaluation")
    _problem_flags(p)
    p.add_argument("--L", dest="L", type=int, help="number of cut steps")
    p.add_argument("--nd", dest="n_d", type=int, help="total iterations used")
    _io_flags(p)

    p = sub.add_parser("montecarlo", help="finite-shot estimate of D")
    _problem_flags(p)
    p.add_argument("--L", dest="L", type=int)
    p.add_argument("--nd", dest="n_d", type=int)
    p.add_argument("--shots", type=int, help="measurement outcomes per probability")
    p.add_argument("--trials", type=int, help="independent inequality tests")
    _io_flags(p)

    p = sub.add_parser("landscape", help="scan D over the (beta, alpha) region")
    _problem_flags(p)
    p.add_argument("--resolution", type=int, help="grid points per axis")
    p.add_argument("--mode", choices=["exact", "sampled"])
    p.add_argument("--shots", type=int)
    p.add_argument("--trials", type=int, help="trials per sampled cell")
    p.add_argument("--no-slices", action="store_true", help="skip the fixed-L slices")
    _io_flags(p)

    p = sub.add_parser("senm-check", help="ensemble-machine inequality checks")
    p.add_argument("--spec-file", type=Path, help="declarative ensemble JSON")
    p.add_argument("--random", dest="random_specs", type=int, help="check N random ensembles")
    p.add_argument("--steps", type=int, help="steps to run a file-loaded ensemble")
    p.add_argument("--imitate", action="store_true", help="fit the quantum step conditionals")
    _problem_flags(p)
    p.add_argument("--L", dest="L", type=int)
    p.add_argument("--nd", dest="n_d", type=int)
    _io_flags(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _merge_options(args: argparse.Namespace, keys: list[str]) -> dict:
    """Config-file values overridden by explicit flags, restricted to keys."""
    file_values: dict = {}
    if getattr(args, "config", None) is not None:
        try:
            file_values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError("config file must contain a JSON object")
        unknown = set(file_values) - set(keys)
        if unknown:
            raise ConfigError(f"config file has unknown keys: {sorted(unknown)}")
    merged = dict(file_values)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if "seed" in keys and merged.get("seed") is None:
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                merged["seed"] = int(env_seed)
            except ValueError as exc:
                raise ConfigError(f"${SEED_ENV_VAR} must be an integer") from exc
    return {k: v for k, v in merged.items() if v is not None}


def _request_keys(model: type[BaseModel]) -> list[str]:
    return list(model.model_fields)


def _post_remote(server: str, path: str, request: BaseModel, response_model):
    import httpx

    url = server.rstrip("/") + path
    try:
        reply = httpx.post(url, json=request.model_dump(mode="json"), timeout=None)
    except httpx.HTTPError as exc:
        raise NumericalInstabilityError(f"cannot reach {url}: {exc}") from exc
    if reply.status_code == 400 or reply.status_code == 422:
        raise ConfigError(f"server rejected the request: {reply.text}")
    if reply.status_code != 200:
        raise NumericalInstabilityError(
            f"server error {reply.status_code}: {reply.text}"
        )
    return response_model.model_validate(reply.json())


def _dispatch(args, path: str, request: BaseModel, response_model, handler):
    if getattr(args, "server", None):
        return _post_remote(args.server, path, request, response_model)
    return handler(request)


def _write_out(args, response: BaseModel) -> None:
    out: Path | None = getattr(args, "out", None)
    if out is None:
        return
    if isinstance(response, LandscapeResponse) and out.suffix == ".csv":
        cells = [
            LandscapeCell(beta=c.beta, alpha=c.alpha, L=c.L, n_d=c.n_d, d=c.d, d_std=c.d_std)
            for c in response.cells
        ]
        out.write_text(grid_to_csv(cells))
        if response.slices:
            slice_cells = [
                LandscapeCell(beta=c.beta, alpha=c.alpha, L=c.L, n_d=c.n_d, d=c.d)
                for rows in response.slices.values()
                for c in rows
            ]
            slices_path = out.with_suffix(".slices.csv")
            slices_path.write_text(grid_to_csv(slice_cells))
            print(f"wrote {out} and {slices_path}")
            return
    else:
        out.write_text(response.model_dump_json(indent=2) + "\n")
    print(f"wrote {out}")


def _print_plan(config) -> None:
    gamma = "" if config.gamma is None else f"gamma={config.gamma:g} "
    print(
        f"plan: {gamma}theta={config.theta:.10g} n_c={config.n_c} "
        f"L={config.L} n_d={config.n_d} step={config.step_power} "
        f"alpha={config.alpha:.4f} beta={config.beta:.4f}"
    )


def _cmd_analyze(args) -> BaseModel:
    options = _merge_options(args, _request_keys(AnalyzeRequest))
    for required in ("L", "n_d"):
        if required not in options:
            raise ConfigError(f"analyze requires --{'nd' if required == 'n_d' else required}")
    request = AnalyzeRequest(**options)
    response = _dispatch(args, "/analyze", request, AnalyzeResponse, handlers.run_analyze)
    _print_plan(response.config)
    print(f"lhs  H(M_L|M_0)          = {response.lhs_bits:.9f} bits")
    print(f"rhs  sum H(M_j|M_(j-1))  = {response.rhs_bits:.9f} bits")
    verdict = "VIOLATED" if response.violated else "satisfied"
    print(f"D = rhs - lhs            = {response.d_value:.9f} bits  [{verdict}]")
    return response


def _cmd_montecarlo(args) -> BaseModel:
    options = _merge_options(args, _request_keys(MonteCarloRequest))
    request = MonteCarloRequest(**options)
    response = _dispatch(
        args, "/montecarlo", request, MonteCarloResponse, handlers.run_montecarlo
    )
    cfg = response.config
    _print_plan(cfg)
    print(f"shots={cfg.shots} trials={cfg.trials} seed={cfg.seed}")
    print(
        f"D = {response.d_mean:.6f} +/- {response.d_std:.6f} (std across trials; "
        f"stderr {response.d_stderr:.6f})"
    )
    print(f"theory D = {response.theory_d:.6f}")
    return response


def _cmd_landscape(args) -> BaseModel:
    options = _merge_options(args, _request_keys(LandscapeRequest))
    if getattr(args, "no_slices", False):
        options["include_slices"] = False
    request = LandscapeRequest(**options)
    response = _dispatch(
        args, "/landscape", request, LandscapeResponse, handlers.run_landscape
    )
    cfg = response.config
    print(
        f"landscape: theta={cfg.theta:.10g} n_c={cfg.n_c} mode={cfg.mode} "
        f"cells={len(response.cells)} seed={cfg.seed}"
    )
    deepest = min(response.cells, key=lambda c: c.d)
    print(
        f"min D = {deepest.d:.6f} at L={deepest.L} n_d={deepest.n_d} "
        f"(alpha={deepest.alpha:.4f}, beta={deepest.beta:.4f})"
    )
    return response


def _cmd_senm_check(args) -> BaseModel:
    keys = _request_keys(SenmCheckRequest)
    options = _merge_options(args, keys)
    spec_file = getattr(args, "spec_file", None)
    if spec_file is not None:
        try:
            options["ensemble"] = json.loads(Path(spec_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read ensemble file {spec_file}: {exc}") from exc
    request = SenmCheckRequest(**options)
    response = _dispatch(
        args, "/senm/check", request, SenmCheckResponse, handlers.run_senm_check
    )
    if response.mode == "random":
        violations = sum(r.violated for r in response.reports)
        print(
            f"random ensembles: {response.num_specs} (seed {response.seed})  "
            f"min D = {response.min_d:.3e}  violations: {violations}"
        )
    elif response.mode == "ensemble":
        r = response.reports[0]
        verdict = "VIOLATED" if r.violated else "satisfied"
        print(f"ensemble file: D = {r.d_value:.9f} bits over {r.steps} steps [{verdict}]")
    else:
        imit = response.imitation
        _print_plan(imit.plan)
        print(f"adjacent-conditional residual = {imit.residual:.3e}")
        print(f"end-to-end gap |P - P_Q|      = {imit.end_gap:.6f}")
        print(
            f"classical D = {imit.classical_d:.6f} (satisfied)  "
            f"quantum D = {imit.quantum_d:.6f}"
            f" [{'VIOLATED' if imit.quantum_d < -1e-9 else 'satisfied'}]"
        )
    return response


def _cmd_serve(args) -> None:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            _cmd_serve(args)
            return EXIT_OK
        command = {
            "analyze": _cmd_analyze,
            "montecarlo": _cmd_montecarlo,
            "landscape": _cmd_landscape,
            "senm-check": _cmd_senm_check,
        }[args.command]
        response = command(args)
        _write_out(args, response)
        return EXIT_OK
    except (ConfigError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConnectionError as exc:
        print(f"transport failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
