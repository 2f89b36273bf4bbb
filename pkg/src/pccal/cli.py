"""Command-line pipeline: design, run, fit, validate, analytics, calibration.

Every command takes a project config file, prints the effective settings it
used (so runs can be replayed), and writes plain-text artifacts into the
config's output directory. Exit codes: 0 success, 1 usage or config error,
2 numerical failure, 3 partial ensemble.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import build_basis
from .bpdn import fit_ensemble
from .calibrate import (CalibrationConfig, HyperPrior, kde_marginal, read_chain,
                        run_mcmc, running_mean, write_chain, write_kde)
from .ensemble import DesignEnsemble, read_ensemble, write_ensemble
from .errors import ConfigError, NumericalError, PartialEnsembleError, PccalError
from .harness import evaluate_synthetic, run_ensemble
from .nisp import degree_band_means, nisp_coefficients, spectrum
from .project import ProjectConfig, load_config
from .quadrature import build_smolyak, read_design, uniform_random_design, write_design
from .surrogate import PCExpansion, read_coefficients, write_coefficients

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _echo(pairs):
    for key, value in pairs:
        print(f"  {key} = {value}")


def _load(args) -> ProjectConfig:
    cfg = load_config(args.config)
    if getattr(args, "output_dir", None):
        cfg.output_dir = Path(args.output_dir)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def cmd_design(args) -> int:
    cfg = _load(args)
    seed = cfg.design_seed if args.seed is None else args.seed
    out = Path(args.output) if args.output else cfg.output_dir / "design.txt"
    print("design: effective config")
    if cfg.design_kind == "smolyak":
        _echo([("kind", "smolyak"), ("dim", cfg.space.dim),
               ("level", cfg.design_level), ("output", out)])
        grid = build_smolyak(cfg.space.dim, cfg.design_level)
        write_design(out, grid)
        print(f"wrote {grid.n_nodes} quadrature nodes to {out}")
    else:
        _echo([("kind", "random"), ("dim", cfg.space.dim),
               ("n", cfg.design_n), ("seed", seed), ("output", out)])
        nodes = uniform_random_design(cfg.space.dim, cfg.design_n, seed)
        write_design(out, nodes, kind="random", seed=seed)
        print(f"wrote {nodes.shape[0]} random nodes to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    design_path = Path(args.design) if args.design else cfg.output_dir / "design.txt"
    design = read_design(design_path)
    if design.dim != cfg.space.dim:
        raise ConfigError(
            f"design dimension {design.dim} does not match parameter space {cfg.space.dim}"
        )
    out = Path(args.output) if args.output else cfg.output_dir / "ensemble.txt"
    if cfg.model_kind is None:
        raise ConfigError(f"{cfg.origin}: command 'run' needs a [model] section")
    print("run: effective config")
    if cfg.model_kind == "synthetic":
        model = cfg.synthetic
        _echo([("model", "synthetic"), ("kind", model.kind),
               ("noise_sigma", model.noise_sigma), ("noise_seed", model.seed),
               ("design", design_path), ("output", out)])
        values = evaluate_synthetic(model, design.nodes)
        ens = DesignEnsemble(nodes=design.nodes, values=values,
                             weights=design.weights,
                             tags=tuple(f"node-{i}" for i in range(len(values))))
        write_ensemble(out, ens, kind=model.kind)
        print(f"wrote {ens.n_rows} evaluations to {out}")
        return EXIT_OK
    spec = cfg.external_spec()
    _echo([("model", "external"), ("work_dir", spec.work_dir),
           ("command", spec.command or "<manifest only>"),
           ("design", design_path), ("output", out)])
    result = run_ensemble(spec, design.nodes, cfg.space, weights=design.weights)
    write_ensemble(out, result.ensemble, kind="external")
    print(f"wrote {result.ensemble.n_rows} evaluations to {out}; "
          f"manifest at {result.manifest_path}")
    if result.pending:
        raise PartialEnsembleError(
            f"{len(result.pending)} nodes pending; rerun after completing the manifest",
            pending=result.pending,
        )
    return EXIT_OK


def _fit_report_path(out: Path) -> Path:
    return out.with_name(out.stem + "_report.txt")


def cmd_fit(args) -> int:
    cfg = _load(args)
    ens_path = Path(args.ensemble) if args.ensemble else cfg.output_dir / "ensemble.txt"
    ens = read_ensemble(ens_path)
    out = Path(args.output) if args.output else cfg.output_dir / "coefficients.txt"
    method = args.method or cfg.fit_method
    basis = build_basis(ens.dim, cfg.fit_order)
    bpdn_cfg = cfg.bpdn
    if args.seed is not None:
        bpdn_cfg.seed = args.seed
    print("fit: effective config")
    _echo([("method", method), ("order", cfg.fit_order),
           ("ensemble", ens_path), ("n_rows", ens.n_rows), ("output", out)])

    meta = {"ensemble": ens_path.name, "n_rows": str(ens.n_rows)}
    if method == "nisp":
        coeffs = nisp_coefficients(basis, ens)
        report = None
    else:
        _echo([("cv_folds", bpdn_cfg.cv_folds), ("opt_tol", bpdn_cfg.opt_tol),
               ("max_iters", bpdn_cfg.max_iters), ("seed", bpdn_cfg.seed),
               ("delta", bpdn_cfg.delta if bpdn_cfg.delta is not None else "<cross-validated>")])
        report = fit_ensemble(basis, ens, bpdn_cfg, n_workers=args.threads)
        coeffs = report.coefficients
        meta["chosen_delta"] = f"{report.chosen_delta:.16e}"
        meta["converged"] = str(report.converged)
        meta["seed"] = str(bpdn_cfg.seed)

    surr = PCExpansion(basis=basis, coefficients=coeffs, fit_method=method,
                       fit_metadata=meta)
    write_coefficients(out, surr)

    nre = surr.nre(ens)
    bands = degree_band_means(basis, coeffs) if coeffs[0] != 0 else None
    rpt_path = _fit_report_path(out)
    with open(rpt_path, "w") as fh:
        fh.write("# pccal fit report\n")
        fh.write(f"# method = {method}\n")
        fh.write(f"# training_nre = {nre:.6e}\n")
        if report is not None:
            fh.write(f"# chosen_delta = {report.chosen_delta:.16e}\n")
            fh.write(f"# l1_norm = {report.l1_norm:.16e}\n")
            fh.write(f"# residual_norm = {report.residual_norm:.16e}\n")
            fh.write(f"# converged = {report.converged}\n")
            if report.cv_errors is not None:
                fh.write("# cv table: rel_delta mean_validation_residual per-fold...\n")
                means = report.cv_errors.mean(axis=0)
                for j, rel in enumerate(report.delta_grid):
                    row = " ".join(f"{v:.8e}" for v in report.cv_errors[:, j])
                    fh.write(f"cv {rel:.8e} {means[j]:.8e} {row}\n")
        if bands is not None:
            fh.write("# band means: degree mean|e_k/e_0|\n")
            for d, mean_ratio in enumerate(bands):
                fh.write(f"band {d} {mean_ratio:.8e}\n")
        fh.write("# spectrum: term degree |e_k/e_0|\n")
        if coeffs[0] != 0:
            for term, deg, ratio in spectrum(basis, coeffs):
                fh.write(f"spec {int(term)} {int(deg)} {ratio:.8e}\n")
    print(f"training NRE = {nre:.4%}; report at {rpt_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    surr = read_coefficients(args.coefficients or cfg.output_dir / "coefficients.txt")
    ens = read_ensemble(args.ensemble or cfg.output_dir / "ensemble.txt")
    nre = surr.nre(ens)
    out = Path(args.output) if args.output else cfg.output_dir / "validate.txt"
    with open(out, "w") as fh:
        fh.write("# pccal validation\n")
        fh.write(f"# n_rows = {ens.n_rows}\n")
        fh.write(f"nre {nre:.16e}\n")
    print(f"validation NRE over {ens.n_rows} rows = {nre:.4%} (written to {out})")
    return EXIT_OK


def cmd_moments(args) -> int:
    cfg = _load(args)
    surr = read_coefficients(args.coefficients or cfg.output_dir / "coefficients.txt")
    out = Path(args.output) if args.output else cfg.output_dir / "moments.txt"
    with open(out, "w") as fh:
        fh.write("# pccal moments\n")
        fh.write(f"mean {surr.mean():.16e}\n")
        fh.write(f"variance {surr.variance():.16e}\n")
        fh.write(f"std {surr.std():.16e}\n")
    print(f"mean = {surr.mean():.6f}, std = {surr.std():.6f} (written to {out})")
    return EXIT_OK


def cmd_sobol(args) -> int:
    cfg = _load(args)
    surr = read_coefficients(args.coefficients or cfg.output_dir / "coefficients.txt")
    T = surr.total_sensitivity()
    out = Path(args.output) if args.output else cfg.output_dir / "sobol.txt"
    names = cfg.space.names if cfg.space.dim == surr.dim else \
        [f"xi{i + 1}" for i in range(surr.dim)]
    with open(out, "w") as fh:
        fh.write("# pccal total sensitivity indices\n")
        for name, t in zip(names, T):
            fh.write(f"{name} {t:.16e}\n")
    print("total sensitivities: "
          + ", ".join(f"{n}={t:.4f}" for n, t in zip(names, T)))
    return EXIT_OK


def cmd_response(args) -> int:
    cfg = _load(args)
    surr = read_coefficients(args.coefficients or cfg.output_dir / "coefficients.txt")
    names = cfg.space.names if cfg.space.dim == surr.dim else \
        [f"xi{i + 1}" for i in range(surr.dim)]
    if args.axis is not None and args.axis2 is not None:
        table = surr.response_surface(args.axis, args.axis2)
        out = cfg.output_dir / f"response_{names[args.axis]}_{names[args.axis2]}.txt"
        with open(out, "w") as fh:
            fh.write(f"# pccal response surface: {names[args.axis]} {names[args.axis2]} E\n")
            for row in table:
                fh.write(f"{row[0]:.16e} {row[1]:.16e} {row[2]:.16e}\n")
        print(f"wrote response surface to {out}")
        return EXIT_OK
    axes = [args.axis] if args.axis is not None else range(surr.dim)
    for ax in axes:
        table = surr.response_slice(ax)
        out = cfg.output_dir / f"response_{names[ax]}.txt"
        with open(out, "w") as fh:
            fh.write(f"# pccal response curve: {names[ax]} E (others fixed at 0)\n")
            for xi_val, e_val in table:
                fh.write(f"{xi_val:.16e} {e_val:.16e}\n")
        print(f"wrote response curve to {out}")
    return EXIT_OK


def cmd_mcmc(args) -> int:
    cfg = _load(args)
    surr = read_coefficients(args.coefficients or cfg.output_dir / "coefficients.txt")
    seed = cfg.calib_seed if args.seed is None else args.seed
    n_iters = args.iterations or cfg.calib_iterations
    burn_in = cfg.calib_burn_in
    if burn_in is not None and burn_in >= n_iters:
        burn_in = n_iters // 5
    scales = cfg.calib_proposal_scale
    if scales.size == 1:
        scales = float(scales[0])
    calib = CalibrationConfig(
        space=cfg.space,
        surrogate=surr,
        hyper=HyperPrior(alpha=cfg.calib_alpha, beta=cfg.calib_beta),
        ke=cfg.calib_ke,
        n_iters=n_iters,
        burn_in=burn_in,
        proposal_scales=scales,
        seed=seed,
        tune=cfg.calib_tune,
    )
    print("mcmc: effective config")
    _echo([("iterations", calib.n_iters), ("burn_in", calib.burn_in),
           ("alpha", cfg.calib_alpha), ("beta", cfg.calib_beta),
           ("ke", cfg.calib_ke), ("seed", seed), ("tune", cfg.calib_tune)])
    chain = run_mcmc(calib)
    out = Path(args.output) if args.output else cfg.output_dir / "chain.txt"
    write_chain(out, chain, cfg.space)
    rm = running_mean(chain)[chain.burn_in:]
    rm_path = cfg.output_dir / "running_mean.txt"
    with open(rm_path, "w") as fh:
        fh.write("# pccal running mean (post burn-in)\n")
        fh.write(f"# columns = iteration {' '.join(cfg.space.names)} S\n")
        stride = max(1, rm.shape[0] // 2000)
        for i in range(0, rm.shape[0], stride):
            vals = " ".join(f"{v:.10e}" for v in rm[i])
            fh.write(f"{chain.burn_in + i} {vals}\n")
    print(f"acceptance rate = {chain.acceptance_rate:.3f}; "
          f"chain at {out}, running mean at {rm_path}")
    return EXIT_OK


def cmd_kde(args) -> int:
    cfg = _load(args)
    chain_path = Path(args.chain) if args.chain else cfg.output_dir / "chain.txt"
    names, samples_p, samples_s, _ = read_chain(chain_path)
    for i, name in enumerate(names):
        table = kde_marginal(samples_p[:, i])
        out = cfg.output_dir / f"kde_{name}.txt"
        write_kde(out, table, label=name)
        print(f"wrote KDE for {name} to {out}")
    table = kde_marginal(samples_s)
    out = cfg.output_dir / "kde_S.txt"
    write_kde(out, table, label="S")
    print(f"wrote KDE for S to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pccal", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pccal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", required=True, help="project config file")
        p.add_argument("--output-dir", help="override [paths] output_dir")
        p.add_argument("--output", help="override the default output file")
        p.add_argument("--threads", type=int, default=1,
                       help="max concurrent workers where supported")
        if seed:
            p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("design", help="write the design (quadrature or random) file")
    common(p, seed=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("run", help="evaluate the model at the design nodes")
    common(p)
    p.add_argument("--design", help="design file (default: <output_dir>/design.txt)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", help="fit PC coefficients from an ensemble")
    common(p, seed=True)
    p.add_argument("--ensemble", help="ensemble file")
    p.add_argument("--method", choices=["nisp", "bpdn"], help="override [fit] method")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="NRE of a surrogate against an ensemble")
    common(p)
    p.add_argument("--coefficients", help="coefficient file")
    p.add_argument("--ensemble", help="ensemble file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("moments", help="surrogate mean and variance")
    common(p)
    p.add_argument("--coefficients", help="coefficient file")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("sobol", help="total sensitivity indices")
    common(p)
    p.add_argument("--coefficients", help="coefficient file")
    p.set_defaults(func=cmd_sobol)

    p = sub.add_parser("response", help="response curves and surfaces")
    common(p)
    p.add_argument("--coefficients", help="coefficient file")
    p.add_argument("--axis", type=int, help="sweep only this axis (0-based)")
    p.add_argument("--axis2", type=int, help="second axis for a 2D surface")
    p.set_defaults(func=cmd_response)

    p = sub.add_parser("mcmc", help="sample the calibrated posterior")
    common(p, seed=True)
    p.add_argument("--coefficients", help="coefficient file")
    p.add_argument("--iterations", type=int, help="override [calibration] iterations")
    p.set_defaults(func=cmd_mcmc)

    p = sub.add_parser("kde", help="marginal posterior densities from a chain")
    common(p)
    p.add_argument("--chain", help="chain file")
    p.set_defaults(func=cmd_kde)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except PartialEnsembleError as exc:
        print(f"partial ensemble: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PccalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
