"""Command line interface: bench run / gradcheck / complexity."""

import argparse
import sys
from dataclasses import replace

import numpy as np

from beamopt._backend import active_backend
from beamopt.config import load_config
from beamopt.harness import (
    ALGORITHMS,
    COMPLEXITY_HEADER,
    SUMMARY_HEADER,
    ExperimentPlan,
    format_table,
    run_experiment,
)
from beamopt.linalg import frob2
from beamopt.metanet import dims_for, net_backward, net_forward, net_init
from beamopt.mlgd import (
    INPUT_ENCODINGS,
    MlgdConfig,
    WindowTape,
    meta_backward,
    mlgd_iteration,
)
from beamopt.metanet import params_flatten, params_unflatten
from beamopt.objective import wsr_gradient, wsr_gradient_fd
from beamopt.scenario import (
    ScenarioConfig,
    init_beamformers,
    noise_variance,
    sample_channels,
)

_SUMMARY_FIELDS = (
    "scenario", "snr_db", "algorithm", "mean_wsr", "var_wsr", "min_wsr",
    "max_wsr", "mean_iters", "mean_wall_ms", "n",
)
_COMPLEXITY_FIELDS = (
    "scenario", "snr_db", "algorithm", "mean_wall_ms", "mean_iters",
    "hpd_solves_per_iter", "matmuls_per_iter", "bisection_searches_per_run",
    "bisection_evals_per_iter", "asymptotic_flops", "model_params",
    "model_nodes",
)


def _add_plan_args(p):
    p.add_argument("--config", required=True, help="flat key=value scenario file")
    p.add_argument("--snr", default=None,
                   help="comma-separated SNR list in dB (default: config snr_db)")
    p.add_argument("--algorithms", default=None,
                   help="comma-separated subset of: %s" % ",".join(ALGORITHMS))
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--iters", type=int, default=None,
                   help="iteration budget for mlgd/gd/adam")
    p.add_argument("--window", type=int, default=None, help="meta-update window")
    p.add_argument("--update-order", choices=("jacobi", "gauss_seidel"),
                   default=None)
    p.add_argument("--input-encoding", choices=INPUT_ENCODINGS, default=None,
                   help="meta-network input transform")
    p.add_argument("--report", choices=("best_iterate", "last_iterate"),
                   default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="output directory for CSVs")


def _build_plan(args, defaults):
    scenario, mcfg, name = load_config(args.config)
    if args.seed is not None:
        scenario = replace(scenario, master_seed=args.seed)
    if args.iters is not None:
        mcfg = replace(mcfg, total_iters=args.iters)
    if args.window is not None:
        mcfg = replace(mcfg, window=args.window)
    if args.update_order is not None:
        mcfg = replace(mcfg, update_order=args.update_order)
    if args.input_encoding is not None:
        mcfg = replace(mcfg, input_encoding=args.input_encoding)
    if args.report is not None:
        mcfg = replace(mcfg, report=args.report)
    snr_list = (
        tuple(float(s) for s in args.snr.split(","))
        if args.snr else (scenario.snr_db,)
    )
    algorithms = (
        tuple(a.strip() for a in args.algorithms.split(","))
        if args.algorithms else ALGORITHMS
    )
    plan = ExperimentPlan(
        scenario=scenario,
        snr_list=snr_list,
        n_realizations=args.realizations
        if args.realizations is not None else defaults["realizations"],
        n_restarts=args.restarts
        if args.restarts is not None else defaults["restarts"],
        algorithms=algorithms,
        mlgd=mcfg,
        first_order_iters=mcfg.total_iters,
        workers=args.workers,
        out_dir=args.out if args.out is not None else defaults["out"],
        name=name,
    )
    return plan


def _cmd_run(args):
    plan = _build_plan(args, {"realizations": 100, "restarts": 10,
                              "out": "bench_out"})
    print("backend: %s" % active_backend())
    print("running %d snr(s) x %d realization(s) x %d restart(s), "
          "algorithms: %s" % (len(plan.snr_list), plan.n_realizations,
                              plan.n_restarts, ",".join(plan.algorithms)))
    result = run_experiment(plan)
    print(format_table(result.summary, _SUMMARY_FIELDS, SUMMARY_HEADER))
    if plan.out_dir:
        print("wrote detail.csv, summary.csv, complexity.csv, manifest.txt "
              "to %s/" % plan.out_dir)
    return 0


def _cmd_complexity(args):
    plan = _build_plan(args, {"realizations": 5, "restarts": 2, "out": ""})
    result = run_experiment(plan)
    print(format_table(result.complexity, _COMPLEXITY_FIELDS,
                       COMPLEXITY_HEADER))
    return 0


def _rel_err(a, b):
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a - b))) / scale


def _cmd_gradcheck(args):
    failures = 0

    # objective gradient vs central differences
    worst = 0.0
    cases = 0
    for k_users, n_tx in ((1, 4), (2, 4), (4, 8)):
        for snr in (0.0, 10.0, 25.0):
            cfg = ScenarioConfig(
                n_tx=n_tx, n_rx=2, n_streams=2, n_users=k_users,
                snr_db=snr, master_seed=args.seed,
            )
            h = sample_channels(cfg, cases)
            v = init_beamformers(cfg, 0, cases)
            s2 = noise_variance(cfg)
            g = wsr_gradient(h, v, s2, cfg.weights)
            g_fd = wsr_gradient_fd(h, v, s2, cfg.weights)
            worst = max(worst, _rel_err(g, g_fd))
            cases += 1
    ok = worst <= 1e-4
    failures += not ok
    print("objective gradient: %d cases, max rel err %.3g  [%s]"
          % (cases, worst, "PASS" if ok else "FAIL"))

    # network backward vs central differences (parameters and input)
    rng = np.random.default_rng(args.seed)
    params = net_init(dims_for(2, 1), args.seed)
    # give the zero output layer something to differentiate through
    params = params_unflatten(
        params_flatten(params)
        + 0.05 * rng.standard_normal(params.n_params), params,
    )
    x = rng.standard_normal(4)
    dy = rng.standard_normal(4)
    y, tape = net_forward(params, x)
    grads, dx = net_backward(params, tape, dy)
    flat = params_flatten(params)
    fd = np.empty_like(flat)
    eps = 1e-6
    for i in range(flat.size):
        up = flat.copy()
        up[i] += eps
        dn = flat.copy()
        dn[i] -= eps
        yp, _ = net_forward(params_unflatten(up, params), x)
        ym, _ = net_forward(params_unflatten(dn, params), x)
        fd[i] = float(np.dot(dy, yp - ym)) / (2 * eps)
    gflat = np.concatenate([
        grads.w1.ravel(), grads.b1.ravel(), grads.w2.ravel(),
        grads.b2.ravel(), grads.w3.ravel(), grads.b3.ravel(),
    ])
    err_p = _rel_err(gflat, fd)
    fdx = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += eps
        xm = x.copy()
        xm[i] -= eps
        yp, _ = net_forward(params, xp)
        ym, _ = net_forward(params, xm)
        fdx[i] = float(np.dot(dy, yp - ym)) / (2 * eps)
    err_x = max(err_p, _rel_err(dx, fdx))
    ok = err_x <= 1e-6
    failures += not ok
    print("network backward: max rel err %.3g  [%s]"
          % (err_x, "PASS" if ok else "FAIL"))

    # meta gradient vs finite differences of the unrolled window
    cfg = ScenarioConfig(n_tx=2, n_rx=1, n_streams=1, n_users=1,
                         snr_db=10.0, master_seed=args.seed)
    h = sample_channels(cfg, 0)
    v0 = init_beamformers(cfg, 0, 0)
    s2 = noise_variance(cfg)
    w = cfg.weights
    p_total = cfg.total_power
    params = net_init(dims_for(2, 1), args.seed + 1)
    params = params_unflatten(
        params_flatten(params)
        + 0.05 * rng.standard_normal(params.n_params), params,
    )
    tape = WindowTape()
    v = v0
    for _ in range(2):
        v, tape = mlgd_iteration(h, v, params, s2, w, p_total, tape)
    grads = meta_backward(tape, params, h, s2, w, p_total)
    gflat = np.concatenate([
        grads.w1.ravel(), grads.b1.ravel(), grads.w2.ravel(),
        grads.b2.ravel(), grads.w3.ravel(), grads.b3.ravel(),
    ])
    frozen = [list(e.inputs) for e in tape.entries]

    def unrolled(theta):
        p = params_unflatten(theta, params)
        vv = v0
        loss = 0.0
        from beamopt.objective import evaluate_wsr
        for entry_inputs in frozen:
            loss += evaluate_wsr(h, vv, s2, w).wsr
            delta = np.empty_like(vv)
            for k, xk in enumerate(entry_inputs):
                yk, _ = net_forward(p, xk)
                delta[k] = (yk[:2] + 1j * yk[2:]).reshape(2, 1)
            pre = vv + delta
            vv = pre * np.sqrt(p_total / frob2(pre))
        return loss

    flat = params_flatten(params)
    fd = np.empty_like(flat)
    eps = 1e-5
    for i in range(flat.size):
        up = flat.copy()
        up[i] += eps
        dn = flat.copy()
        dn[i] -= eps
        fd[i] = (unrolled(up) - unrolled(dn)) / (2 * eps)
    err_m = _rel_err(gflat, fd)
    ok = err_m <= 1e-4
    failures += not ok
    print("meta gradient (window of 2): max rel err %.3g  [%s]"
          % (err_m, "PASS" if ok else "FAIL"))

    print("gradcheck: %s" % ("all suites passed" if failures == 0
                             else "%d suite(s) FAILED" % failures))
    return 1 if failures else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bench",
        description="weighted sum-rate beamforming benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sweep and write CSVs")
    _add_plan_args(p_run)

    p_grad = sub.add_parser("gradcheck",
                            help="finite-difference gradient verification")
    p_grad.add_argument("--seed", type=int, default=0)

    p_cx = sub.add_parser("complexity",
                          help="per-iteration operation-count comparison")
    _add_plan_args(p_cx)

    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "gradcheck":
        return _cmd_gradcheck(args)
    if args.command == "complexity":
        return _cmd_complexity(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
