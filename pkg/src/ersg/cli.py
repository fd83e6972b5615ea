"""Command-line front end.

Subcommands: ``solve``, ``eval``, ``sweep``, ``oneshot``, ``validate``.
Exit codes: 0 success, 2 invalid input, 3 solver did not converge (the best
iterate is still written, flagged ``"converged": false``), 4 a strategy
could not be transferred to an evaluation map.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._stagewise import worker_count
from .discounted import DEFAULT_TOL as DISCOUNTED_TOL
from .discounted import solve_discounted
from .errors import ConvergenceError, InvalidGameError, OneShotError, TransferError
from .evaluate import best_response_value, exploitability, phi_inf, phi_n, win_probability
from .game_model import (
    Game,
    MarkovStrategy,
    RegularizationConfig,
    StationaryStrategy,
    format_beta,
    load_game,
    parse_beta,
    require_valid_strategy,
    validate_game,
)
from .gridworld import ProductGame, build_game, load_map, transfer_strategy
from .nstage import solve_nstage
from .oneshot import DEFAULT_TOL as ONESHOT_TOL
from .oneshot import OneShotProblem, solve

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_TRANSFER = 0, 2, 3, 4

CSV_HEADER = ["beta1", "beta2", "solve_map", "eval_map", "start_state", "win_prob", "phi",
              "exploitability_p1", "exploitability_p2"]
DEFAULT_BETAS = "2,3,4,5,6,7,8,9,10"
DEFAULT_EVAL_MAPS = "builtin:nominal,builtin:blocked,builtin:side"


class UsageError(ValueError):
    """Invalid command-line input (exit code 2)."""


# -- loading -----------------------------------------------------------------


def load_game_spec(spec: str) -> tuple[Game, ProductGame | None]:
    """A game from ``builtin:<map>``, an ASCII map file or a game JSON file."""
    if spec.startswith("builtin:") or not spec.endswith(".json"):
        pg = build_game(load_map(spec))
        return pg.game, pg
    return load_game(spec), None


def _read_json(path: str):
    return json.loads(Path(path).read_text())


def load_strategy(path: str, key: str):
    """Strategy table from a solution file (``key`` is "sigma" or "tau") or a bare array."""
    d = _read_json(path)
    table = d[key] if isinstance(d, dict) else d
    arr = np.asarray(table, dtype=float)
    if arr.ndim == 2:
        return StationaryStrategy(arr), d
    if arr.ndim == 3:
        return MarkovStrategy(arr), d
    raise UsageError(f"{path}: strategy must be a 2-D or 3-D array, got {arr.ndim}-D")


def _parse_betas(text: str) -> list[float]:
    betas = [parse_beta(b) for b in str(text).split(",") if b.strip()]
    if not betas:
        raise UsageError("beta list is empty")
    return betas


def _dump(obj, out: str | None, timestamp: bool = False) -> None:
    if timestamp:
        obj = dict(obj, timestamp=datetime.now(timezone.utc).isoformat())
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args, *, need_gamma=False, need_horizon=False) -> RegularizationConfig:
    if args.beta1 is None or args.beta2 is None:
        raise UsageError("--beta1 and --beta2 are required")
    gamma = getattr(args, "gamma", None)
    horizon = getattr(args, "horizon", None)
    if need_gamma and gamma is None:
        raise UsageError("--gamma is required")
    if need_horizon and horizon is None:
        raise UsageError("--horizon is required")
    if gamma is not None and horizon is not None:
        raise UsageError("give only one of --gamma and --horizon")
    return RegularizationConfig(args.beta1, args.beta2, gamma=gamma, horizon=horizon)


# -- commands ------------------------------------------------------------------


def cmd_solve(args) -> int:
    g, _ = load_game_spec(args.game)
    if args.mode == "nstage":
        cfg = _config(args, need_horizon=True)
        tol = args.tol if args.tol is not None else ONESHOT_TOL
        try:
            sol = solve_nstage(g, cfg, tol)
        except OneShotError as e:
            _dump({"kind": "nstage", "converged": False, "error": str(e),
                   "best": None if e.best is None else e.best.to_dict()}, args.out)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        d = sol.to_dict()
        d["converged"] = True
        _dump(d, args.out, args.timestamp)
        return EXIT_OK
    cfg = _config(args, need_gamma=True)
    tol = args.tol if args.tol is not None else DISCOUNTED_TOL
    try:
        sol = solve_discounted(g, cfg, tol, max_sweeps=args.max_sweeps)
    except ConvergenceError as e:
        _dump(e.partial.to_dict(), args.out)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except OneShotError as e:
        _dump({"kind": "discounted", "converged": False, "error": str(e)}, args.out)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    _dump(sol.to_dict(), args.out, args.timestamp)
    return EXIT_OK


def _fill_from_solution(args, d) -> None:
    if not isinstance(d, dict):
        return
    for name in ("beta1", "beta2", "gamma"):
        if getattr(args, name, None) is None and name in d:
            setattr(args, name, parse_beta(d[name]) if name != "gamma" else float(d[name]))
    if args.horizon is None and args.gamma is None and "N" in d:
        args.horizon = int(d["N"])


def _state_list(text) -> list[int]:
    return [int(s) for s in str(text).split(",") if s.strip()]


def cmd_eval(args) -> int:
    g, pg = load_game_spec(args.game)
    sigma, d_sigma = load_strategy(args.sigma, "sigma")
    tau, d_tau = load_strategy(args.tau, "tau")
    _fill_from_solution(args, d_sigma)
    _fill_from_solution(args, d_tau)
    for s, player in ((sigma, 1), (tau, 2)):
        try:
            require_valid_strategy(g, s, player)
        except InvalidGameError as e:
            raise UsageError(str(e)) from e
    start = args.start if args.start is not None else (pg.start if pg is not None else 0)
    if not 0 <= start < g.n_states:
        raise UsageError(f"start state {start} out of range")
    if not (args.phi or args.win or args.exploitability):
        args.phi = True
    cfg = _config(args)
    report = {
        "beta1": format_beta(cfg.beta1),
        "beta2": format_beta(cfg.beta2),
        "environment": args.game,
        "start_state": g.labels.get(start, str(start)),
    }
    stationary = isinstance(sigma, StationaryStrategy) and isinstance(tau, StationaryStrategy)
    if args.phi:
        if cfg.discounted:
            if not stationary:
                raise UsageError("discounted evaluation needs stationary strategies")
            v = phi_inf(g, cfg, sigma, tau)
            report["phi"] = float(v[start])
            report["phi_by_state"] = v.tolist()
        else:
            mu = np.zeros(g.n_states)
            mu[start] = 1.0
            report["phi"] = phi_n(g, cfg, sigma, tau, mu)
    if args.win:
        if not stationary:
            raise UsageError("win probability needs stationary strategies")
        if pg is not None:
            win_states, lose_states = [pg.win_sink], [pg.capture_sink]
        elif args.win_states is not None and args.lose_states is not None:
            win_states, lose_states = _state_list(args.win_states), _state_list(args.lose_states)
        else:
            raise UsageError("--win-states and --lose-states are required for non-grid games")
        r = win_probability(g, sigma, tau, win_states, lose_states, start)
        report.update(win_prob=r.win, lose_prob=r.lose, never_absorbed=r.never)
    if args.exploitability:
        if not (stationary and cfg.discounted):
            raise UsageError("exploitability needs stationary strategies and --gamma")
        e1, e2 = exploitability(g, cfg, sigma, tau)
        report.update(exploitability_p1=float(e1[start]), exploitability_p2=float(e2[start]))
    _dump(report, args.out, args.timestamp)
    return EXIT_OK


def _sweep_point(beta, args, src: ProductGame, opponent_tau, evals):
    cfg = RegularizationConfig(beta, beta, gamma=args.gamma)
    sol = solve_discounted(src.game, cfg, args.tol)
    tau_src = sol.tau if args.opponent == "regularized" else opponent_tau
    rows = []
    for name, dst in evals:
        sigma = transfer_strategy(sol.sigma, src, dst)
        tau = transfer_strategy(tau_src, src, dst)
        start = dst.start
        r = win_probability(dst.game, sigma, tau, [dst.win_sink], [dst.capture_sink], start)
        v = phi_inf(dst.game, cfg, sigma, tau)
        _, v1 = best_response_value(dst.game, cfg, tau, 2)
        _, v2 = best_response_value(dst.game, cfg, sigma, 1)
        rows.append({
            "beta1": beta, "beta2": beta, "solve_map": args.solve_map, "eval_map": name,
            "start_state": dst.game.labels[start], "win_prob": r.win, "phi": float(v[start]),
            "exploitability_p1": float(v1[start] - v[start]),
            "exploitability_p2": float(v[start] - v2[start]),
        })
    return rows


def sweep_rows(args) -> list[dict]:
    """Rows of the robustness sweep, sorted by (beta, eval map) with infinity last."""
    betas = _parse_betas(args.betas)
    src = build_game(load_map(args.solve_map))
    evals = [(name, build_game(load_map(name))) for name in args.eval_maps.split(",") if name.strip()]
    if not evals:
        raise UsageError("no evaluation maps given")
    nash = solve_discounted(src.game, RegularizationConfig(math.inf, math.inf, gamma=args.gamma), args.tol)
    n = worker_count()
    if n > 1 and len(betas) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(lambda b: _sweep_point(b, args, src, nash.tau, evals), betas))
    else:
        chunks = [_sweep_point(b, args, src, nash.tau, evals) for b in betas]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["beta1"], r["eval_map"]))
    return rows


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (format_beta(r[k]) if k in ("beta1", "beta2") else r[k]) for k in CSV_HEADER})
    return buf.getvalue()


def cmd_sweep(args) -> int:
    if args.gamma is None:
        raise UsageError("--gamma is required")
    text = format_csv(sweep_rows(args))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oneshot(args) -> int:
    rho = args.rho
    if Path(rho).is_file():
        rho = Path(rho).read_text()
    try:
        rho = np.asarray(json.loads(rho), dtype=float)
    except (json.JSONDecodeError, ValueError) as e:
        raise UsageError(f"--rho must be a JSON matrix or a file holding one: {e}") from e
    if args.beta1 is None or args.beta2 is None:
        raise UsageError("--beta1 and --beta2 are required")
    p = OneShotProblem(rho, args.beta1, args.beta2)
    tol = args.tol if args.tol is not None else ONESHOT_TOL
    try:
        sol = solve(p, tol=tol)
    except OneShotError as e:
        d = e.best.to_dict()
        d["converged"] = False
        _dump(d, args.out)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    d = sol.to_dict()
    d["converged"] = True
    _dump(d, args.out, args.timestamp)
    return EXIT_OK


def cmd_validate(args) -> int:
    g, _ = load_game_spec(args.game)
    problems = validate_game(g)
    _dump({"game": args.game, "states": g.n_states, "valid": not problems, "violations": problems}, args.out)
    return EXIT_OK if not problems else EXIT_INVALID


# -- parser ------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys supply defaults for these flags")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--timestamp", action="store_true", help="add a wall-clock timestamp to JSON output")


def _add_betas(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta1", type=parse_beta, help='player 1 rationality (number or "inf")')
    p.add_argument("--beta2", type=parse_beta, help='player 2 rationality (number or "inf")')


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="ersg", description="Entropy-regularized zero-sum stochastic games.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("solve", help="solve an N-stage or discounted game")
    _add_common(p)
    p.add_argument("--game", help="builtin:<map>, map file or game JSON")
    p.add_argument("--mode", choices=["nstage", "discounted"], default="discounted")
    _add_betas(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-sweeps", type=int, default=10_000)
    p.set_defaults(func=cmd_solve)
    subs["solve"] = p

    p = sub.add_parser("eval", help="evaluate a strategy pair")
    _add_common(p)
    p.add_argument("--game")
    p.add_argument("--sigma", help="solution or strategy JSON for player 1")
    p.add_argument("--tau", help="solution or strategy JSON for player 2")
    _add_betas(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--start", type=int, help="start state index (grid maps default to the map's start)")
    p.add_argument("--win-states", help="comma-separated state indices (non-grid games)")
    p.add_argument("--lose-states", help="comma-separated state indices (non-grid games)")
    p.add_argument("--phi", action="store_true")
    p.add_argument("--win", action="store_true")
    p.add_argument("--exploitability", action="store_true")
    p.set_defaults(func=cmd_eval)
    subs["eval"] = p

    p = sub.add_parser("sweep", help="beta sweep of player 1 against a fixed opponent")
    _add_common(p)
    p.add_argument("--solve-map", default="builtin:nominal")
    p.add_argument("--eval-maps", default=DEFAULT_EVAL_MAPS, help="comma-separated maps")
    p.add_argument("--betas", default=DEFAULT_BETAS, help='comma-separated betas, "inf" allowed')
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--tol", type=float, default=DISCOUNTED_TOL)
    p.add_argument("--opponent", choices=["nash", "regularized"], default="nash")
    p.set_defaults(func=cmd_sweep)
    subs["sweep"] = p

    p = sub.add_parser("oneshot", help="solve a single regularized matrix game")
    _add_common(p)
    p.add_argument("--rho", help="JSON matrix or file holding one")
    _add_betas(p)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_oneshot)
    subs["oneshot"] = p

    p = sub.add_parser("validate", help="check a game's invariants")
    _add_common(p)
    p.add_argument("--game")
    p.set_defaults(func=cmd_validate)
    subs["validate"] = p
    return parser, subs


_CONVERTERS = {"beta1": parse_beta, "beta2": parse_beta}
_REQUIRED = {"solve": ("game",), "eval": ("game", "sigma", "tau"), "sweep": (),
             "oneshot": ("rho",), "validate": ("game",)}


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = _read_json(args.config)
        except (OSError, json.JSONDecodeError) as e:
            parser.error(f"cannot read --config: {e}")
        if not isinstance(cfg, dict):
            parser.error("--config must hold a JSON object")
        defaults = {k.replace("-", "_"): (_CONVERTERS[k](v) if k in _CONVERTERS else v) for k, v in cfg.items()}
        known = {a.dest for a in subs[args.command]._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            parser.error(f"unknown --config keys: {', '.join(unknown)}")
        subs[args.command].set_defaults(**defaults)
        args = parser.parse_args(argv)  # explicit flags still win
    for name in _REQUIRED[args.command]:
        if getattr(args, name) is None:
            parser.error(f"--{name} is required")
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args)
    except TransferError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_TRANSFER
    except ConvergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except OneShotError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (UsageError, InvalidGameError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
