#!/usr/bin/env python3
"""
GUR Mixedness Witness - command-line interface.

Detects whether qubit and qutrit states are pure or mixed from the
Robertson-Schroedinger uncertainty functional Q, and checks printed closed
forms for Q against direct matrix evaluation. Subcommands:
- eval-q: Q and its breakdown for one state and two observables
- scheme: the sequential single-qutrit purity test
- classify: the two-qutrit purity test
- concordance: printed formula vs. matrix oracle reports
- budget: tomography vs. uncertainty-based measurement counts
- sweep: a state family swept to CSV
- blind-spot: mixed states a given epsilon misses
- audit: seeded random checks of the core invariants

Reports go to stdout (or --out); status lines go to stderr.

Example:
    python main.py eval-q --state '{"kind":"bloch","dim":3,"n":[0,0,0,0,0,0,0,0]}' --a lambda3 --b lambda7
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src import config
from src.core_utils import MixednessWitnessError, ValidationError, handle_error, log, safe_execute
from src.detection import (
    BLIND_SPOT_FAMILIES,
    PurityVerdict,
    SchemeConfig,
    blind_spot,
    budget_table,
    classify_two_qutrit,
    detection_statistic,
    run_qutrit_scheme,
)
from src.reports import SUMMARY_HEADER, emit_csv, emit_json, load_baseline, regressions, summary_rows, write_concordance
from src.state_space import (
    DensityMatrix,
    admissible_range,
    bloch_of,
    density_from_bloch,
    describe_state,
    isotropic,
    linear_entropy,
    one_param_qutrit,
    qubit_density,
    random_density,
    random_hermitian,
    state_from_json,
    werner_qubit,
)
from src.su_algebra import (
    HermitianOperator,
    conjugate,
    direction_operator,
    observable_catalogue,
    pauli,
    random_unitary,
    tensor,
)
from src.uncertainty import (
    CONCORDANCE_IDS,
    FORMULA_ALIASES,
    SettingFamily,
    concordance_all,
    q_max_over_settings,
    q_oracle,
    resolve_formula_id,
)

COMMANDS = ("eval-q", "scheme", "classify", "concordance", "budget", "sweep", "blind-spot", "audit")
SWEEP_FAMILIES = ("isotropic", "werner_qubit", "qubit", "one_param:<i>")
AUDIT_DIMS = (2, 3, 4, 9)
NONNEG_TOL = 1e-10


def banner(title: str) -> None:
    log("\n" + "=" * 60)
    log(title)
    log("=" * 60)


# =============================================================================
# RUN CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class RunConfig:
    """Validated command-line settings shared by every subcommand."""
    command: str
    state_source: Optional[str]
    epsilon: float
    grid: int
    seed: int
    output_format: str
    output_path: Optional[Path]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        if args.command not in COMMANDS:
            raise ValidationError(f"unknown command '{args.command}'")
        epsilon = float(args.epsilon)
        if not np.isfinite(epsilon) or epsilon <= 0:
            raise ValidationError(f"--epsilon must be positive, got {args.epsilon}")
        grid = int(args.grid)
        if grid < config.MIN_GRID:
            raise ValidationError(f"--grid must be at least {config.MIN_GRID}, got {grid}")
        return cls(
            command=args.command,
            state_source=getattr(args, "state", None),
            epsilon=epsilon,
            grid=grid,
            seed=int(args.seed),
            output_format=args.format,
            output_path=Path(args.out) if args.out else None,
        )


def load_state(source: Optional[str]) -> DensityMatrix:
    """Parse --state as inline JSON or as a path to a JSON file."""
    if not source:
        raise ValidationError("--state is required for this command")
    path = Path(source)
    if not source.lstrip().startswith("{") and path.exists():
        source = safe_execute(path.read_text, encoding="utf-8", error_type=ValidationError,
                              context=f"reading state file {path}")
    return state_from_json(source)


def parse_observable(spec: str) -> HermitianOperator:
    """Observable from a name (lambda3, sigmax, spinz), a JSON direction,
    a JSON {"re", "im"} matrix, or comma-separated tensor factors."""
    spec = spec.strip()
    catalogue = observable_catalogue()
    if spec.startswith("["):
        try:
            return direction_operator(json.loads(spec))
        except json.JSONDecodeError as e:
            raise ValidationError(f"observable '{spec}': malformed JSON direction ({e.msg})") from e
    if spec.startswith("{"):
        try:
            obj = json.loads(spec)
            re = np.asarray(obj["re"], dtype=float)
            im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        except json.JSONDecodeError as e:
            raise ValidationError(f"observable: malformed JSON matrix ({e.msg})") from e
        except KeyError as e:
            raise ValidationError("observable: matrix is missing field 're'") from e
        except (TypeError, ValueError) as e:
            raise ValidationError(f"observable: fields 're'/'im' must be numeric matrices ({e})") from e
        if re.shape != im.shape:
            raise ValidationError("observable: fields 're' and 'im' must have the same shape")
        return HermitianOperator.from_matrix(re + 1j * im)
    if "," in spec:
        factors = [parse_observable(part) for part in spec.split(",")]
        op = factors[0]
        for factor in factors[1:]:
            op = tensor(op, factor)
        return op
    if spec in catalogue:
        return catalogue[spec]
    raise ValidationError(f"unknown observable '{spec}' (names: {', '.join(catalogue)}, a JSON direction or matrix)")


def _emit(run: RunConfig, payload: Any, header: Sequence[str], rows: List[Sequence[Any]]) -> None:
    if run.output_format == "csv":
        emit_csv(header, rows, run.output_path)
    else:
        emit_json(payload, run.output_path)


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_eval_q(run: RunConfig, args: argparse.Namespace) -> int:
    rho = load_state(run.state_source)
    a, b = parse_observable(args.a), parse_observable(args.b)
    report = q_oracle(rho, a, b)
    log(f"[+] Q = {report.q:.12g}")
    payload = {"state": describe_state(rho), "a": args.a, "b": args.b, "report": report.to_dict()}
    fields = report.to_dict()
    _emit(run, payload, list(fields), [list(fields.values())])
    return 0


def cmd_scheme(run: RunConfig, args: argparse.Namespace) -> int:
    rho = load_state(run.state_source)
    trace = run_qutrit_scheme(rho, SchemeConfig(epsilon=run.epsilon, strict_pairs=args.strict_pairs))
    log(f"[+] Verdict: {trace.verdict.value}")
    rows = [[s.a, s.b, s.q, s.below] for s in trace.steps]
    _emit(run, trace.to_dict(), ["a", "b", "q", "below"], rows)
    return 0


def cmd_classify(run: RunConfig, args: argparse.Namespace) -> int:
    rho = load_state(run.state_source)
    result = classify_two_qutrit(rho, epsilon=run.epsilon, grid=run.grid, constrained=not args.unconstrained)
    log(f"[+] Verdict: {result.verdict.value} (q_max = {result.q_max:.12g})")
    _emit(run, result.to_dict(), ["verdict", "q_max", "epsilon"],
          [[result.verdict.value, result.q_max, result.epsilon]])
    return 0


def cmd_concordance(run: RunConfig, args: argparse.Namespace) -> int:
    ids = list(CONCORDANCE_IDS) if args.formula_id == "all" else [resolve_formula_id(args.formula_id)]
    unknown = [fid for fid in ids if fid not in CONCORDANCE_IDS]
    if unknown:
        raise ValidationError(f"unknown formula id '{unknown[0]}' (known: all, {', '.join(CONCORDANCE_IDS)}, "
                              f"or an alias: {', '.join(FORMULA_ALIASES)})")
    baseline = load_baseline(Path(args.baseline)) if args.baseline else None

    banner(f"CONCORDANCE: {len(ids)} formula(s), grid {run.grid}")
    reports = concordance_all(run.grid, ids)
    write_concordance(reports, Path(args.report_dir))

    rows = summary_rows(reports)
    payload = [dict(zip(SUMMARY_HEADER, row)) for row in rows]
    _emit(run, payload, SUMMARY_HEADER, rows)

    if baseline is not None:
        regressed = regressions(reports, baseline)
        if regressed:
            log(f"[!] Regressed against baseline: {', '.join(regressed)}")
            return 1
        log("[+] No regressions against baseline")
    return 0


def cmd_budget(run: RunConfig, args: argparse.Namespace) -> int:
    banner("MEASUREMENT BUDGET: TOMOGRAPHY VS UNCERTAINTY")
    table = [row.to_dict() for row in budget_table()]
    header = list(table[0])
    _emit(run, table, header, [list(row.values()) for row in table])
    return 0


def _sweep_points(start: float, stop: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ValidationError(f"--step must be positive, got {step}")
    if stop < start:
        raise ValidationError(f"--stop ({stop}) must not be below --start ({start})")
    return np.linspace(start, stop, int(round((stop - start) / step)) + 1)


def _sweep_family(name: str, run: RunConfig) -> Tuple[str, Tuple[float, float], Callable[[float], Tuple[float, float, str]]]:
    """(parameter name, admissible range, point -> (q_max, linear_entropy, verdict))."""
    eps = run.epsilon

    def verdict_of(q: float) -> str:
        return (PurityVerdict.MIXED if q >= eps else PurityVerdict.PURE).value

    if name == "isotropic":
        def point(p):
            rho = isotropic(p)
            result = classify_two_qutrit(rho, epsilon=eps, grid=run.grid)
            return result.q_max, linear_entropy(rho), result.verdict.value
        return "p", (0.0, 1.0), point

    if name == "werner_qubit":
        family = SettingFamily.planar_two_qubit(free=("phi_n", "phi_p", "phi_q"))

        def point(p):
            rho = werner_qubit(p)
            q_max, _ = q_max_over_settings(rho, family, grid=run.grid)
            return q_max, linear_entropy(rho), verdict_of(q_max)
        return "p", (-1.0 / 3.0, 1.0), point

    if name == "qubit":
        a, b = pauli("z"), pauli("x")

        def point(n):
            rho = qubit_density([0.0, 0.0, n])
            q = q_oracle(rho, a, b).q
            return q, linear_entropy(rho), verdict_of(q)
        return "n", (-1.0, 1.0), point

    if name.startswith("one_param:"):
        try:
            index = int(name.split(":", 1)[1])
        except ValueError as e:
            raise ValidationError(f"sweep family '{name}': index must be an integer 1..8") from e
        lo, hi = admissible_range(index)
        scheme = SchemeConfig(epsilon=eps)

        def point(v):
            state = one_param_qutrit(index, v)
            stat = detection_statistic(state, scheme)
            return stat, linear_entropy(density_from_bloch(state)), run_qutrit_scheme(state, scheme).verdict.value
        return f"n{index}", (lo, hi), point

    raise ValidationError(f"unknown sweep family '{name}' (known: {', '.join(SWEEP_FAMILIES)})")


def cmd_sweep(run: RunConfig, args: argparse.Namespace) -> int:
    param, (lo, hi), point = _sweep_family(args.family, run)
    xs = _sweep_points(args.start, args.stop, args.step)
    tol = config.POSITIVITY_TOL
    if xs[0] < lo - tol or xs[-1] > hi + tol:
        raise ValidationError(f"sweep range [{xs[0]:g}, {xs[-1]:g}] leaves the state space ({param} in [{lo:.12g}, {hi:.12g}])")

    banner(f"SWEEP: {args.family} ({len(xs)} points)")
    rows = []
    for x in tqdm(xs, desc=args.family, disable=not config.VERBOSE):
        q_max, entropy, verdict = point(float(x))
        rows.append([float(x), q_max, entropy, verdict])

    header = [param, "q_max", "linear_entropy", "verdict"]
    if run.output_format == "json":
        emit_json([dict(zip(header, row)) for row in rows], run.output_path)
    else:
        emit_csv(header, rows, run.output_path)
    return 0


def cmd_blind_spot(run: RunConfig, args: argparse.Namespace) -> int:
    grid = args.optimizer_grid
    result = blind_spot(args.family, run.epsilon, index=args.index, grid=grid)
    fields = result.to_dict()
    fields["interval"] = f"{result.interval[0]!r}:{result.interval[1]!r}"
    _emit(run, result.to_dict(), list(fields), [list(fields.values())])
    return 0


def _audit_sample(rng: np.random.Generator, dim: int) -> Dict[str, bool]:
    rho = random_density(dim, rng)
    a, b = random_hermitian(dim, rng), random_hermitian(dim, rng)
    report = q_oracle(rho, a, b)
    scale = max(1.0, abs(report.q), report.var_a * report.var_b)

    u = random_unitary(dim, rng)
    rotated = q_oracle(DensityMatrix.from_matrix(u @ rho.matrix @ u.conj().T), conjugate(a, u), conjugate(b, u))

    checks = {
        "nonnegativity": report.q >= -NONNEG_TOL,
        "breakdown": abs(report.var_a * report.var_b - report.commutator_term
                         - report.anticommutator_term - report.q) <= 1e-12 * scale,
        "unitary_covariance": abs(rotated.q - report.q) <= 1e-10 * scale,
    }
    if dim in (2, 3):
        back = density_from_bloch(bloch_of(rho)).matrix
        checks["bloch_roundtrip"] = bool(np.max(np.abs(back - rho.matrix)) <= 1e-12)
    return checks


def cmd_audit(run: RunConfig, args: argparse.Namespace) -> int:
    if args.count < 1:
        raise ValidationError(f"--count must be at least 1, got {args.count}")
    banner(f"AUDIT: {args.count} random samples (seed {run.seed})")

    passed: Dict[str, int] = {}
    failed: Dict[str, List[int]] = {}
    for i in tqdm(range(args.count), desc="audit", disable=not config.VERBOSE):
        rng = np.random.default_rng([run.seed, i])
        for name, ok in _audit_sample(rng, AUDIT_DIMS[i % len(AUDIT_DIMS)]).items():
            passed.setdefault(name, 0)
            failed.setdefault(name, [])
            if ok:
                passed[name] += 1
            else:
                failed[name].append(i)

    total_failures = sum(len(v) for v in failed.values())
    rows = [[name, passed[name], len(failed[name])] for name in sorted(passed)]
    payload = {
        "count": args.count,
        "seed": run.seed,
        "properties": {name: {"passed": passed[name], "failed": len(failed[name]), "failing_samples": failed[name][:20]}
                       for name in sorted(passed)},
        "all_passed": total_failures == 0,
    }
    _emit(run, payload, ["property", "passed", "failed"], rows)
    if total_failures:
        log(f"[!] {total_failures} property check(s) failed")
        return 1
    log("[+] All property checks passed")
    return 0


HANDLERS: Dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "eval-q": cmd_eval_q,
    "scheme": cmd_scheme,
    "classify": cmd_classify,
    "concordance": cmd_concordance,
    "budget": cmd_budget,
    "sweep": cmd_sweep,
    "blind-spot": cmd_blind_spot,
    "audit": cmd_audit,
}


# =============================================================================
# ARGUMENT PARSING
# =============================================================================

def add_common(p: argparse.ArgumentParser, grid_default: int = config.DEFAULT_GRID,
               format_default: str = "json") -> argparse.ArgumentParser:
    # Added per subparser: a shared parent would share Action objects and their defaults.
    p.add_argument("--epsilon", type=float, default=config.DEFAULT_EPSILON,
                   help=f"Detection threshold on Q. Default: {config.DEFAULT_EPSILON}")
    p.add_argument("--grid", type=int, default=grid_default,
                   help=f"Optimizer points per angle (concordance: grid size). Default: {grid_default}")
    p.add_argument("--seed", type=int, default=0, help="Random seed (audit). Default: 0")
    p.add_argument("--format", choices=["json", "csv"], default=format_default,
                   help=f"Output format. Default: {format_default}")
    p.add_argument("--out", "-o", help="Write the report here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="GUR Mixedness Witness - purity detection from the uncertainty functional Q",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py eval-q --state '{"kind":"family","name":"one_param","params":{"index":8,"value":-1}}' --a lambda3 --b lambda7
  python main.py scheme --state '{"kind":"bloch","dim":3,"n":[0,0,0,0,0,0,0,0]}'
  python main.py concordance all --grid 24
  python main.py sweep --family isotropic --start 0 --stop 1 --step 0.05 --format csv
  python main.py audit --count 1000 --seed 7
        """
    )
    sub = parser.add_subparsers(dest="command", required=True)

    eval_q = add_common(sub.add_parser("eval-q", help="Evaluate Q for a state and two observables"))
    eval_q.add_argument("--state", required=True, help="State JSON (inline or file path)")
    eval_q.add_argument("--a", required=True, help="Observable A (e.g. lambda3, sigmaz, [0,0,1], lambda1,lambda2)")
    eval_q.add_argument("--b", required=True, help="Observable B")

    scheme = add_common(sub.add_parser("scheme", help="Sequential single-qutrit purity test"))
    scheme.add_argument("--state", required=True, help="Qutrit state JSON (inline or file path)")
    scheme.add_argument("--strict-pairs", action="store_true",
                        help="Declare Mixed as soon as a pair splits instead of moving on")

    classify = add_common(sub.add_parser("classify", help="Two-qutrit purity test"))
    classify.add_argument("--state", required=True, help="Two-qutrit state JSON (inline or file path)")
    classify.add_argument("--unconstrained", action="store_true",
                          help="Free theta2 instead of tying it to theta3 + theta4")

    conc = add_common(sub.add_parser("concordance", help="Printed formulas vs. matrix oracle"),
                      grid_default=config.DEFAULT_CONCORDANCE_GRID)
    conc.add_argument("formula_id", help=f"Formula id, short alias such as eq5 or F13, or 'all' ({', '.join(CONCORDANCE_IDS)})")
    conc.add_argument("--report-dir", default=str(config.OUTPUT_DIR / "concordance"),
                      help="Directory for per-formula JSON/CSV reports")
    conc.add_argument("--baseline", help="Previous summary.json; exit 1 if any verdict regresses")

    add_common(sub.add_parser("budget", help="Tomography vs. uncertainty measurement counts"))

    sweep = add_common(sub.add_parser("sweep", help="Sweep a state family to CSV"), format_default="csv")
    sweep.add_argument("--family", required=True, help=f"One of {', '.join(SWEEP_FAMILIES)}")
    sweep.add_argument("--start", type=float, required=True)
    sweep.add_argument("--stop", type=float, required=True)
    sweep.add_argument("--step", type=float, required=True)

    spot = add_common(sub.add_parser("blind-spot", help="Mixed states a given epsilon misses"))
    spot.add_argument("--family", required=True, choices=BLIND_SPOT_FAMILIES)
    spot.add_argument("--index", type=int, default=None, help="Gell-Mann index for one_param_qutrit")
    spot.add_argument("--optimizer-grid", type=int, default=config.BLIND_SPOT_GRID,
                      help=f"Optimizer grid for maximised families. Default: {config.BLIND_SPOT_GRID}")

    audit = add_common(sub.add_parser("audit", help="Seeded random invariant checks"))
    audit.add_argument("--count", type=int, default=1000, help="Number of random samples. Default: 1000")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code.

    Exit codes: 0 success, 1 audit failure or concordance regression,
    2 invalid input, 3 positivity violation, 4 numerical failure.
    """
    args = build_parser().parse_args(argv)
    try:
        run = RunConfig.from_args(args)
        return HANDLERS[run.command](run, args)
    except MixednessWitnessError as e:
        handle_error(e, context=args.command)
        return e.exit_code
    except (OSError, ValueError) as e:
        handle_error(e, context=args.command)
        return ValidationError.exit_code


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n[!] Process interrupted by user", file=sys.stderr)
        sys.exit(130)
