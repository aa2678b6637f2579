"""Command-line entry point: ``fairalloc <subcommand> ...``.

Exit codes: 0 success, 2 infeasible problem, 3 input or parse error,
4 numerical failure. Every output file is written atomically.
"""

import argparse
import csv
import io
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .bandit import (
    METHODS,
    ExperimentConfig,
    LearnerConfig,
    run_experiment,
    summarize,
)
from .charts import Series, emit_chart
from .design import (
    BoundParameterError,
    BoundQuery,
    DegenerateDesignError,
    design_diagnostics,
    g_optimal_design,
    sample_bound,
    verify_bound_empirically,
)
from .estimators import ConvergenceError
from .fileio import (
    InputError,
    atomic_write,
    dumps,
    policy_from_dict,
    policy_to_dict,
    population_from_dict,
    save_population,
)
from .lp import to_lp_format
from .policy import (
    InfeasibleBudgetError,
    NotApplicableError,
    UndefinedConditionalError,
    build_policy_lp,
    feasible_range,
    greedy_per_dollar,
    pareto_frontier,
    reference_points,
    solve_policy,
    spend_by_group,
    utility,
)
from .population import (
    ATTRIBUTES,
    PopulationError,
    SyntheticPopConfig,
    UtilitySpec,
    gen_stylized_population,
    gen_structural_population,
)

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


# ---------------------------------------------------------------- input helpers


def resolve_input(path):
    """``path`` if it exists, else a bundled fixture of that name (``counterexample`` or ``counterexample.json``)."""
    if os.path.exists(path):
        return path
    name = os.path.basename(path)
    data = resources.files("fairalloc") / "data"
    for cand in (name, name + ".json"):
        f = data / cand
        if f.is_file():
            return str(f)
    raise InputError(f"no such file or bundled fixture: {path}")


def read_json(path):
    path = resolve_input(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    return doc


def read_population(path):
    """(PopulationDoc, raw document) for a population file or bundled fixture."""
    doc = read_json(path)
    return population_from_dict(doc), doc


def parse_lambda(values, groups, default):
    """``--lambda 0.1`` for every group or ``--lambda g=0.1`` per group; returns a tuple."""
    if not values:
        return default
    lam = dict(zip(groups, default)) if len(default) == len(groups) else {g: 0.0 for g in groups}
    for v in values:
        if "=" in v:
            g, _, w = v.partition("=")
            if g not in lam:
                raise InputError(f"--lambda names unknown group {g!r}")
            lam[g] = _float(w, "--lambda")
        else:
            w = _float(v, "--lambda")
            lam = {g: w for g in groups}
    return tuple(lam[g] for g in groups)


def _float(text, what):
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{what}: not a number: {text!r}") from None


def doc_weights(raw, groups):
    """Parity weights from a document value: scalar, list in group order, or {group: weight}."""
    if raw is None:
        return tuple(0.0 for _ in groups)
    if isinstance(raw, (int, float)):
        return tuple(float(raw) for _ in groups)
    if isinstance(raw, list):
        if len(raw) != len(groups):
            raise InputError(f"{len(raw)} parity weights for {len(groups)} groups")
        return tuple(float(w) for w in raw)
    if isinstance(raw, dict):
        unknown = set(raw) - set(groups)
        if unknown:
            raise InputError(f"parity weights name unknown groups {sorted(unknown)}")
        return tuple(float(raw.get(g, 0.0)) for g in groups)
    raise InputError("parity_weights must be a number, list or object")


def utility_spec(args, raw, pop):
    u = raw.get("utility") or {}
    if not isinstance(u, dict):
        raise InputError("'utility' must be an object")
    budget = args.budget if args.budget is not None else u.get("budget")
    if budget is None:
        raise InputError("no budget: pass --budget or set utility.budget in the population file")
    lam = parse_lambda(args.lam, pop.groups, doc_weights(u.get("parity_weights"), pop.groups))
    return UtilitySpec(lam, float(budget))


def true_rewards(pdoc):
    if pdoc.expected_rewards is not None:
        return pdoc.expected_rewards
    if pdoc.model is not None:
        return np.asarray(pdoc.model.mean(), dtype=float)
    raise InputError("population file has neither expected_rewards nor an outcome_model")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write(path, buf.getvalue())


def num(v):
    """Shortest round-trip text for a float (deterministic across runs)."""
    return repr(float(v))


# ---------------------------------------------------------------- optimize


def cmd_optimize(args):
    pdoc, raw = read_population(args.population)
    pop = pdoc.population
    f = true_rewards(pdoc)
    spec = utility_spec(args, raw, pop)
    if args.lp_dump:
        lp, _ = build_policy_lp(pop, f, spec)
        atomic_write(args.lp_dump, to_lp_format(lp))
    policy, u = solve_policy(pop, f, spec, args.solver)
    total, by_group = spend_by_group(policy, pop)
    extra = {}
    if args.compare_greedy:
        extra["greedy_per_dollar"] = utility(greedy_per_dollar(pop, f, spec.budget), pop, f, spec)
    doc = policy_to_dict(
        pop, policy.assignment, utility=u, budget=spec.budget, spend=float(total),
        group_spend={g: float(s) for g, s in zip(pop.groups, by_group)}, **extra,
    )
    print(f"utility {u:.6f}")
    if args.compare_greedy:
        print(f"greedy_per_dollar {extra['greedy_per_dollar']:.6f}")
    text = dumps(doc)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- pareto


def cmd_pareto(args):
    cfg = read_json(args.config) if args.config else {}
    n = args.n if args.n is not None else int(cfg.get("n", 100000))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    b = args.budget if args.budget is not None else float(cfg.get("budget", 1.0 / 3.0))
    lam = args.lam_value if args.lam_value is not None else float(cfg.get("lambda", 0.0))
    grid = args.grid if args.grid is not None else int(cfg.get("grid", 101))
    target_name = cfg.get("target_group", "g1")
    if grid < 2:
        raise InputError("--grid needs at least 2 points")
    if not 0 <= b <= 1:
        raise InputError("budget must lie in [0, 1] for unit-cost treatment")
    pop, model, u = gen_stylized_population(n, seed)
    if target_name not in pop.groups:
        raise InputError(f"unknown target group {target_name!r}")
    target = pop.groups.index(target_name)
    f = model.mean()
    q_grid = np.linspace(0.0, 1.0, grid)
    pts = pareto_frontier(pop, f, b, q_grid, target=target, lam=lam)
    refs = reference_points(pop, f, b, model.potential_outcomes(np.arange(n), u), target=target, lam=lam)
    out = args.out
    write_csv(os.path.join(out, "frontier.csv"), ["q", "appearances", "penalty", "utility", "feasible"],
              [[num(p.q), num(p.appearances), num(p.penalty), num(p.utility), int(p.feasible)] for p in pts])
    mass = pop.group_mass()[target]
    gidx = pop.group_index()
    rows = []
    for name, p in refs._asdict().items():
        q = p.q
        if p.policy is not None:
            q = float(pop.probs[gidx == target] @ p.policy.assignment[gidx == target, 1] / mass)
        rows.append([name, num(q), num(p.appearances), num(p.penalty), num(p.utility), int(p.feasible)])
    write_csv(os.path.join(out, "reference.csv"), ["point", "q", "appearances", "penalty", "utility", "feasible"], rows)
    ok = [p for p in pts if p.feasible]
    lo, hi = feasible_range(pop, b, target)
    series = [Series("frontier", np.array([p.q for p in ok]), np.array([p.appearances for p in ok]))]
    for name, row in zip(refs._fields, rows):
        series.append(Series(name, np.array([float(row[1])]), np.array([float(row[2])])))
    emit_chart(series, os.path.join(out, "frontier.svg"), title="Pareto frontier",
               xlabel=f"P(treated | {target_name})", ylabel="expected appearances")
    print(f"feasible q range [{lo:.6f}, {hi:.6f}], {len(ok)} of {len(pts)} grid points")
    for row in rows:
        print(f"{row[0]} q={float(row[1]):.6f} appearances={float(row[2]):.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- design


def cmd_design(args):
    pdoc, _ = read_population(args.population)
    pop = pdoc.population
    if pop.features is None:
        raise InputError("design needs context features")
    des = g_optimal_design(pop, tol=args.tol, max_iter=args.max_iter, method=args.method)
    doc = policy_to_dict(pop, des.assignment, logdet=des.logdet, g=des.g, c=des.c, rho0=des.rho0,
                         iterations=des.iterations, converged=des.converged)
    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "design.json"), dumps(doc))
    write_csv(os.path.join(args.out, "diagnostics.csv"), ["d", "logdet", "g", "c", "rho0", "iterations", "converged"],
              [[pop.features.shape[2], num(des.logdet), num(des.g), num(des.c), num(des.rho0), des.iterations,
                int(des.converged)]])
    print(f"logdet {des.logdet:.9f} g {des.g:.9f} c {des.c:.9f} rho0 {des.rho0:.9f} "
          f"iterations {des.iterations} converged {des.converged}")
    return EXIT_OK if des.converged else EXIT_NUMERIC


# ---------------------------------------------------------------- bounds


def cmd_bounds(args):
    kw = {}
    for key, attr in (("sigma", "sigma"), ("n_contexts", "contexts"), ("n_actions", "actions"),
                      ("p_min", "p_min"), ("d", "d"), ("rho0", "rho0"), ("c", "c"), ("K0", "K0"), ("K1", "K1"),
                      ("K2", "K2"), ("rho", "rho"), ("constant", "constant")):
        v = getattr(args, attr)
        if v is not None:
            kw[key] = v
    if args.population:
        pdoc, raw = read_population(args.population)
        pop = pdoc.population
        if args.variant == "tabular":
            kw.setdefault("n_contexts", pop.n_contexts)
            kw.setdefault("n_actions", pop.n_actions)
            kw.setdefault("p_min", float(pop.probs.min()))
        else:
            if pop.features is None:
                raise InputError("population has no features")
            if args.design:
                v = policy_from_dict(read_json(args.design), pop)
            else:
                v = g_optimal_design(pop).assignment
            _, _, _, c, rho0 = design_diagnostics(pop, v)
            if not np.isfinite(c):
                raise InputError("the supplied design has a singular covariance")
            kw.setdefault("d", pop.features.shape[2])
            kw["c"] = kw.get("c", c)
            kw.setdefault("rho0", rho0)
    elif args.design:
        raise InputError("--design needs --population")
    q = BoundQuery(args.variant, args.epsilon, args.delta, **kw)
    res = sample_bound(q)
    print(f"n {res.n}")
    print(f"value {res.value!r}")
    print(f"formula {res.expression}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


SIM_KEYS = {"format", "kind", "population", "method", "n", "reps", "seed", "lambda", "budget", "epsilon",
            "ucb_percentile", "warmup", "stop_n", "snapshot_every", "candidates", "warmup_require", "model"}


def _sim_population(spec_pop):
    """(Population, model, named boolean masks) from the config's ``population`` entry."""
    if isinstance(spec_pop, str):
        pdoc, _ = read_population(spec_pop)
        if pdoc.model is None or not getattr(pdoc.model, "binary", False):
            raise InputError("simulation needs a binary outcome model in the population file")
        return pdoc.population, pdoc.model, {}
    if not isinstance(spec_pop, dict) or spec_pop.get("generator") != "structural":
        raise InputError("'population' must be a file path or {generator: structural, ...}")
    kw = {k: v for k, v in spec_pop.items() if k not in ("generator", "seed")}
    for k in ("beta", "log_miles_mean"):
        if k in kw:
            kw[k] = tuple(kw[k])
    try:
        cfg = SyntheticPopConfig(**kw)
    except TypeError as exc:
        raise InputError(f"bad population generator settings: {exc}") from None
    pop, model, attrs = gen_structural_population(cfg, int(spec_pop.get("seed", 0)))
    return pop, model, {a: attrs[:, i] > 0.5 for i, a in enumerate(ATTRIBUTES[:3])}


def load_sim_config(args):
    cfg = read_json(args.config)
    unknown = set(cfg) - SIM_KEYS
    if unknown:
        raise InputError(f"unknown config keys {sorted(unknown)}")
    over = {"n": args.n, "reps": args.reps, "lambda": args.lam_value, "budget": args.budget,
            "epsilon": args.epsilon, "ucb_percentile": args.ucb_percentile, "warmup": args.warmup,
            "stop_n": args.stop_n, "snapshot_every": args.snapshot_every}
    for k, v in over.items():
        if v is not None:
            cfg[k] = v
    if args.methods:
        cfg["method"] = args.methods
    cfg["seed"] = args.seed
    return cfg


def cmd_simulate(args):
    cfg = load_sim_config(args)
    if "population" not in cfg:
        raise InputError("simulation config needs a 'population' entry")
    pop, model, masks = _sim_population(cfg["population"])
    methods = cfg.get("method", ["thompson"])
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",")]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise InputError(f"unknown methods {bad}; choose from {list(METHODS)}")
    methods = [m for m in methods if m != "oracle"]
    req = []
    for name in cfg.get("warmup_require", []):
        if name not in masks:
            raise InputError(f"warmup_require: unknown attribute {name!r} (have {sorted(masks)})")
        req.append(masks[name])
    lam = cfg.get("lambda", 0.004)
    spec = UtilitySpec(doc_weights(lam, pop.groups), float(cfg.get("budget", 5.0)))
    learners = [LearnerConfig(m, epsilon=float(cfg.get("epsilon", 0.1)),
                              alpha=float(cfg.get("ucb_percentile", 0.975)), warmup=int(cfg.get("warmup", 4)),
                              stop_n=int(cfg.get("stop_n", 250)), model=cfg.get("model", "logistic"))
                for m in methods]
    ecfg = ExperimentConfig(n=int(cfg.get("n", 1000)), reps=int(cfg.get("reps", 500)), seed=int(cfg["seed"]),
                            candidates=int(cfg.get("candidates", 1000)),
                            snapshot_every=int(cfg.get("snapshot_every", 50)), warmup_require=tuple(req))
    if ecfg.n < 1 or ecfg.reps < 1:
        raise InputError("n and reps must be positive")
    trace = run_experiment(pop, model, spec, learners, config=ecfg)
    write_simulation(trace, args.out, trace_csv=not args.no_trace, charts=not args.no_charts)
    for m in ["oracle"] + methods:
        s = summarize(trace, m)
        print(f"{m}: regret {s.regret_mean[-1]:.3f} pct {s.pct_mean[-1]:.2f} "
              f"spend {s.spend_per_person.mean():.3f}")
    return EXIT_OK


def write_simulation(trace, out, trace_csv=True, charts=True):
    """trace.csv, reps.csv, summary.csv, curves.csv and the two charts."""
    os.makedirs(out, exist_ok=True)
    names = ["oracle"] + list(trace.methods)
    groups = list(trace.group_names)
    sums = {m: summarize(trace, m) for m in names}
    if trace_csv:
        atomic_write(os.path.join(out, "trace.csv"), trace.to_csv())
    reps = trace.context.shape[0]
    n = trace.context.shape[1]
    rows = []
    for m in names:
        s = sums[m]
        reg = trace.oracle.cum_utility[:, -1] - (trace.oracle if m == "oracle" else trace.methods[m]).cum_utility[:, -1]
        for r in range(reps):
            rows.append([r, m, num(reg[r]), num(s.pct[r, -1]), num(s.spend_per_person[r])]
                        + [num(s.group_spend[r, g]) for g in range(len(groups))]
                        + [num(trace.u_star[r]), num(trace.u_none[r])])
    write_csv(os.path.join(out, "reps.csv"),
              ["rep", "method", "regret", "pct_of_optimal", "spend_per_person"]
              + [f"spend_{g}" for g in groups] + ["u_star", "u_none"], rows)
    rows = []
    for m in names:
        s = sums[m]
        disp = np.nanmean(s.disparity, axis=0)
        rows.append([m, reps, n, num(s.regret_mean[-1]), num(s.regret_se[-1]), num(s.pct_mean[-1]),
                     num(s.pct_se[-1]), num(s.spend_per_person.mean()), num(trace.budget)]
                    + [num(d) for d in disp])
    write_csv(os.path.join(out, "summary.csv"),
              ["method", "reps", "n", "regret_mean", "regret_se", "pct_mean", "pct_se", "spend_mean", "budget"]
              + [f"disparity_{g}" for g in groups], rows)
    rows = []
    cps = trace.checkpoints
    for m in names:
        s = sums[m]
        for j, i in enumerate(cps):
            rows.append([m, int(i), num(s.regret_mean[i - 1]), num(s.regret_se[i - 1]), num(s.pct_mean[j]),
                         num(s.pct_se[j])])
    write_csv(os.path.join(out, "curves.csv"), ["method", "i", "regret_mean", "regret_se", "pct_mean", "pct_se"], rows)
    if charts:
        x = np.arange(1, n + 1)
        reg = [Series.from_reps(m, x, trace.regret(m)) for m in trace.methods]
        emit_chart(reg, os.path.join(out, "regret.svg"), title="Cumulative regret", xlabel="individuals",
                   ylabel="regret vs oracle", hline=0.0)
        pct = [Series.from_reps(m, cps, sums[m].pct) for m in trace.methods]
        emit_chart(pct, os.path.join(out, "pct.svg"), title="Learned policy, % of optimal", xlabel="individuals",
                   ylabel="% of optimal", hline=100.0)


# ---------------------------------------------------------------- gen


def cmd_gen(args):
    if args.kind == "structural":
        cfg = SyntheticPopConfig(n=args.n or 5000, cost_per_mile=args.cost_per_mile)
        pop, model, _ = gen_structural_population(cfg, args.seed)
        save_population(args.out, pop, model, model.mean())
    elif args.kind == "stylized":
        pop, model, u = gen_stylized_population(args.n or 1000, args.seed)
        save_population(args.out, pop, model, model.mean(), latent_u=u)
    else:
        src = resolve_input("counterexample")
        with open(src, encoding="utf-8") as fh:
            atomic_write(args.out, fh.read())
        pop = population_from_dict(read_json(src)).population
    print(f"wrote {args.out}: {pop.n_contexts} contexts, {pop.n_actions} actions, groups {list(pop.groups)}")
    return EXIT_OK


# ---------------------------------------------------------------- verify


class _GaussianNoise:
    """Outcomes f(x, k) + sigma * N(0, 1)."""

    def __init__(self, f, sigma):
        self.f = f
        self.sigma = sigma

    def sample(self, rng, contexts, actions):
        mu = self.f[contexts, actions]
        return mu + self.sigma * rng.standard_normal(np.shape(mu))


def cmd_verify(args):
    pdoc, raw = read_population(args.population)
    pop = pdoc.population
    f = true_rewards(pdoc)
    spec = utility_spec(args, raw, pop)
    model = pdoc.model
    sigma = args.sigma if args.sigma is not None else float(getattr(model, "sigma", 0.0) or 0.0)
    if not sigma > 0:
        raise InputError("verify needs a noise scale sigma > 0 (--sigma or the outcome model's)")
    if model is None or args.sigma is not None:
        model = _GaussianNoise(f, sigma)
    rng = np.random.default_rng(args.seed)
    if args.variant == "tabular":
        q = BoundQuery("tabular", args.epsilon, args.delta, sigma=sigma,
                       n_contexts=pop.n_contexts, n_actions=pop.n_actions, p_min=float(pop.probs.min()))
        frac, gaps = verify_bound_empirically(pop, f, spec, q, args.reps, rng, model=model)
    else:
        if pop.features is None:
            raise InputError("linear verification needs features")
        des = g_optimal_design(pop)
        q = BoundQuery("linear", args.epsilon, args.delta, sigma=sigma,
                       d=pop.features.shape[2], rho0=des.rho0, c=des.c)
        frac, gaps = verify_bound_empirically(pop, f, spec, q, args.reps, rng, model=model,
                                              design=des.assignment)
    n = sample_bound(q).n
    if args.out:
        write_csv(os.path.join(args.out, "verify.csv"), ["rep", "n", "gap", "success"],
                  [[r, n, num(g), int(g < args.epsilon)] for r, g in enumerate(gaps)])
    print(f"n {n}")
    print(f"success_fraction {frac:.6f} target {1 - args.delta:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _utility_flags(p):
    p.add_argument("--budget", type=float, help="per-capita budget b (overrides the file)")
    p.add_argument("--lambda", dest="lam", action="append", metavar="[GROUP=]W",
                   help="parity weight for every group, or GROUP=W; repeatable")


def build_parser():
    top = _Parser(prog="fairalloc", description="Budgeted, parity-penalized allocation policies.")
    top.add_argument("--version", action="version", version=f"fairalloc {__version__}")
    sub = top.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("optimize", help="solve the policy LP for a population file")
    p.add_argument("population")
    _utility_flags(p)
    p.add_argument("--solver", choices=("auto", "simplex", "partition"), default="auto")
    p.add_argument("--out", help="write the policy document here instead of stdout")
    p.add_argument("--lp-dump", help="write the LP in text LP format")
    p.add_argument("--compare-greedy", action="store_true", help="also report the greedy gain-per-dollar policy")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("pareto", help="frontier and reference points for the stylized two-group model")
    p.add_argument("config", nargs="?", help="pareto config document (e.g. the bundled 'stylized')")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=float)
    p.add_argument("--lambda", dest="lam_value", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("design", help="G-optimal data-collection design")
    p.add_argument("population")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--method", choices=("pairwise", "vanilla"), default="pairwise")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("bounds", help="sufficient sample size for a target utility gap")
    p.add_argument("--variant", choices=("tabular", "linear", "logistic"), required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--contexts", type=int)
    p.add_argument("--actions", type=int)
    p.add_argument("--p-min", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--rho0", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--K0", type=float)
    p.add_argument("--K1", type=float)
    p.add_argument("--K2", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--constant", type=float)
    p.add_argument("--population", help="take |X|, |A|, p_min or d, c, rho0 from this population")
    p.add_argument("--design", help="policy document to compute c and rho0 from (default: G-optimal)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="online learning experiment")
    p.add_argument("config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--lambda", dest="lam_value", type=float)
    p.add_argument("--budget", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--ucb-percentile", type=float)
    p.add_argument("--warmup", type=int)
    p.add_argument("--stop-n", type=int)
    p.add_argument("--snapshot-every", type=int)
    p.add_argument("--no-trace", action="store_true", help="skip the per-step trace CSV")
    p.add_argument("--no-charts", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen", help="write a synthetic population file")
    p.add_argument("kind", choices=("structural", "stylized", "counterexample"))
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cost-per-mile", type=float, default=10.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="Monte-Carlo check of a sample-size bound")
    p.add_argument("population")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--variant", choices=("tabular", "linear"), default="tabular")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--sigma", type=float, help="outcome noise scale (default: the outcome model's)")
    _utility_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return top


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        return args.func(args)
    except InfeasibleBudgetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DegenerateDesignError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, PopulationError, BoundParameterError, NotApplicableError, UndefinedConditionalError,
            ValueError, LookupError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
