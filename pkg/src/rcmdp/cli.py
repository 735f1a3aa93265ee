"""Command-line harness: ``rcmdp {generate,run,eval,validate}``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .critic import CriticConfig
from .errors import ConfigError, ErgodicityWarning, RcmdpError
from .experiment import ExperimentConfig, eval_policy, run_experiment
from .instances import generate_instance, load_instance, load_policy, read_json, save_instance
from .mdp_core import validate
from .objective import auto_lambda
from .uncertainty import model_from_dict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_NO_CONVERGENCE = 4


def _radii(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius list {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="rcmdp", description=__doc__)
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a generated instance to JSON")
    gen.add_argument("--kind", choices=["random-garnet", "gridworld"], default="random-garnet")
    gen.add_argument("--config", help="JSON file with generator params")
    gen.add_argument("--params", default="{}", help="inline JSON generator params")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output instance file")

    run = sub.add_parser("run", help="run the actor-critic over radii x repetitions")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory (overrides config)")
    run.add_argument("--exact-oracle", action="store_true", help="log exact F and oracle summaries")
    run.add_argument("--radius", type=_radii, help="comma-separated radii (overrides config)")
    run.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    ev = sub.add_parser("eval", help="evaluate a policy file on an instance")
    ev.add_argument("--policy", required=True)
    ev.add_argument("--instance", required=True)
    ev.add_argument("--config", help="JSON with 'model' and optional 'critic', 'epsilon', 'zeta', 'lambda'")
    ev.add_argument("--model", choices=["contamination", "tv", "wasserstein"])
    ev.add_argument("--radius", type=float)
    ev.add_argument("--order", type=float, default=1.0)
    ev.add_argument("--mode", choices=["oracle", "critic"], default="oracle")
    ev.add_argument("--epsilon", type=float, default=0.05)
    ev.add_argument("--zeta", type=float, default=0.0)
    ev.add_argument("--lambda", dest="lam", type=float)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    val = sub.add_parser("validate", help="structural and sampled ergodicity checks")
    val.add_argument("--instance", required=True)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def _cmd_generate(args):
    params = json.loads(args.params)
    if args.config:
        params.update(read_json(args.config))
    mdp = generate_instance(args.kind, params, args.seed)
    save_instance(args.out, mdp)
    if not args.quiet:
        print(f"wrote {args.kind} instance ({mdp.n_states} states, {mdp.n_actions} actions) to {args.out}")
    return EXIT_OK


def _cmd_run(args):
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    if args.radius:
        cfg.radii = args.radius
    if args.exact_oracle:
        cfg.exact_oracle = True
    run_experiment(cfg, quiet=args.quiet)
    return EXIT_OK


def _cmd_eval(args):
    mdp = load_instance(args.instance)
    policy = load_policy(args.policy)
    extra = read_json(args.config) if args.config else {}
    model_spec = dict(extra.get("model", {}))
    if args.model:
        model_spec["kind"] = args.model
        model_spec.setdefault("order", args.order)
    if args.radius is not None:
        model_spec["radius"] = args.radius
    if "kind" not in model_spec:
        raise ConfigError("eval needs --model or a config with a 'model' object")
    model = model_from_dict(model_spec, mdp.n_states)
    zeta = extra.get("zeta", args.zeta)
    lam = args.lam if args.lam is not None else extra.get("lambda")
    if lam is None:
        lam = auto_lambda(extra.get("epsilon", args.epsilon), zeta)
    critic = CriticConfig.from_dict(extra["critic"]) if "critic" in extra else None
    report = eval_policy(policy, mdp, model, args.mode, lam, zeta, critic, args.seed)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _cmd_validate(args):
    mdp = load_instance(args.instance)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ErgodicityWarning)
        report = validate(mdp, seed=args.seed)
    out = report.to_dict()
    out["warnings"] = [str(w.message) for w in caught]
    print(json.dumps(out, indent=2))
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "run": _cmd_run, "eval": _cmd_eval, "validate": _cmd_validate}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (RcmdpError, ValueError) as exc:
        code = getattr(exc, "exit_code", EXIT_CONFIG)
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        if getattr(exc, "residual", None) is not None:
            record["residual"] = exc.residual
        print(json.dumps(record), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
