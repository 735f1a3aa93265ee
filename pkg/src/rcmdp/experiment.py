"""Experiment configuration, execution and metrics export."""

from __future__ import annotations

import copy
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .actor import ActorConfig, run
from .critic import CriticConfig, td_evaluate
from .errors import ConfigError
from .instances import generate_instance, instance_from_dict, load_instance, write_atomic, write_json
from .mdp_core import PolicyTable
from .objective import f_value
from .oracle import robust_evaluate
from .sampling import PRNG_FAMILY, GenerativeModel
from .uncertainty import model_from_dict

THREADS_ENV = "RCMDP_THREADS"


@dataclass
class ExperimentConfig:
    """Parsed experiment file.

    ``instance`` holds exactly one of ``inline`` (instance object),
    ``generator`` (``{"kind", "params", "seed"}``) or ``path``. ``model`` is an
    uncertainty-model object without its radius; radii come from ``radii``.
    """

    instance: dict
    model: dict
    radii: list
    actor: ActorConfig = field(default_factory=ActorConfig)
    seed: int = 0
    output_dir: str = "out"
    repetitions: int = 1
    exact_oracle: bool = False
    reference_eval: bool = True
    base_dir: str = "."

    def __post_init__(self):
        if not self.radii:
            raise ConfigError("radius list must be nonempty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        sources = [k for k in ("inline", "generator", "path") if k in self.instance]
        if len(sources) != 1:
            raise ConfigError("instance needs exactly one of 'inline', 'generator', 'path'")
        self.radii = [float(r) for r in self.radii]

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = copy.deepcopy(d)
        try:
            actor = ActorConfig.from_dict(d.pop("actor", {}))
            return cls(instance=d.pop("instance"), model=d.pop("model"), radii=d.pop("radii"),
                       actor=actor, base_dir=base_dir, **d)
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from None

    @classmethod
    def load(cls, path):
        from .instances import read_json

        return cls.from_dict(read_json(path), base_dir=os.path.dirname(os.path.abspath(path)))

    def to_dict(self):
        return {
            "instance": copy.deepcopy(self.instance),
            "model": copy.deepcopy(self.model),
            "radii": list(self.radii),
            "actor": self.actor.to_dict(),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "repetitions": self.repetitions,
            "exact_oracle": self.exact_oracle,
            "reference_eval": self.reference_eval,
        }

    def build_instance(self):
        src = self.instance
        if "inline" in src:
            return instance_from_dict(src["inline"])
        if "generator" in src:
            gen = src["generator"]
            return generate_instance(gen.get("kind"), gen.get("params"), gen.get("seed", 0))
        path = src["path"]
        if not os.path.isabs(path):
            path = os.path.join(self.base_dir, path)
        return load_instance(path)

    def build_model(self, radius, n_states):
        spec = dict(self.model)
        spec["radius"] = radius
        return model_from_dict(spec, n_states)


def trace_csv(trace, n_constraints, with_exact):
    cols = ["t", "active_index"] + [f"g{i}_hat" for i in range(n_constraints + 1)] + ["F_hat"]
    if with_exact:
        cols.append("F_exact")
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for rec in trace.records:
        row = [str(rec.t), str(rec.active_index)] + [repr(float(g)) for g in rec.g_hat] + [repr(float(rec.f_hat))]
        if with_exact:
            row.append(repr(float(rec.f_exact)))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def oracle_report(mdp, policy, model, lam, zeta):
    g = []
    for sig in mdp.signals():
        g.append(robust_evaluate(mdp, policy, sig, model).g)
    g = np.array(g)
    f, active = f_value(g, mdp.thresholds, lam, zeta)
    return {"g": g.tolist(), "F": f, "active_index": active,
            "feasible": bool(np.all(g[1:] <= mdp.thresholds)),
            "violations": [i + 1 for i in np.nonzero(g[1:] > mdp.thresholds)[0].tolist()]}


def _run_one(cfg: ExperimentConfig, mdp, radius_idx, rep, out_dir, quiet):
    radius = cfg.radii[radius_idx]
    model = cfg.build_model(radius, mdp.n_states)
    actor_cfg = cfg.actor
    if cfg.exact_oracle and not actor_cfg.track_exact:
        actor_cfg = ActorConfig.from_dict({**actor_cfg.to_dict(), "track_exact": True})
    gm = GenerativeModel(mdp, cfg.seed, key=(radius_idx, rep))
    start = time.perf_counter()
    policy, trace = run(mdp, model, actor_cfg, gm)
    wall = time.perf_counter() - start
    run_dir = os.path.join(out_dir, f"radius{radius_idx}_rep{rep}")
    with_exact = actor_cfg.track_exact
    write_atomic(os.path.join(run_dir, "trace.csv"), trace_csv(trace, mdp.n_constraints, with_exact))
    summary = {
        "radius": radius,
        "radius_index": radius_idx,
        "repetition": rep,
        "seed": cfg.seed,
        "stream_key": [radius_idx, rep],
        "lambda": actor_cfg.lam,
        "best_t": trace.best_t,
        "final_policy": policy.probs.tolist(),
        "wall_clock_s": wall,
        "config": cfg.to_dict(),
    }
    if trace.best_t is not None:
        best = trace.records[trace.best_t]
        summary["best_g_hat"] = best.g_hat.tolist()
        summary["best_F_hat"] = best.f_hat
    if cfg.exact_oracle:
        summary["oracle"] = oracle_report(mdp, policy, model, actor_cfg.lam, actor_cfg.zeta)
    if cfg.reference_eval:
        uniform = PolicyTable.uniform(mdp.n_states, mdp.n_actions)
        summary["reference_eval"] = {"policy": "uniform",
                                     **oracle_report(mdp, uniform, model, actor_cfg.lam, actor_cfg.zeta)}
    write_json(os.path.join(run_dir, "summary.json"), summary)
    write_json(os.path.join(run_dir, "meta.json"), {
        "prng_family": PRNG_FAMILY, "root_seed": cfg.seed, "stream_key": [radius_idx, rep],
        "code_version": f"rcmdp {__version__}",
    })
    if not quiet:
        print(f"radius={radius:g} rep={rep}: best_t={trace.best_t} -> {run_dir}")
    return run_dir


def run_experiment(cfg: ExperimentConfig, quiet=False, threads=None):
    """Execute every radius x repetition; returns the list of run directories."""
    mdp = cfg.build_instance()
    out_dir = cfg.output_dir
    if not os.path.isabs(out_dir):
        out_dir = os.path.abspath(out_dir)
    jobs = [(ri, rep) for ri in range(len(cfg.radii)) for rep in range(cfg.repetitions)]
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, os.cpu_count() or 1))
    threads = max(1, min(threads, len(jobs)))
    if threads == 1:
        return [_run_one(cfg, mdp, ri, rep, out_dir, quiet) for ri, rep in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_one, cfg, mdp, ri, rep, out_dir, quiet) for ri, rep in jobs]
        return [f.result() for f in futures]


def eval_policy(policy, mdp, model, mode="oracle", lam=80.0, zeta=0.0, critic=None, seed=0):
    """g for every signal, feasibility flags, F and the active index."""
    if mode == "oracle":
        return {"mode": mode, **oracle_report(mdp, policy, model, lam, zeta)}
    if mode != "critic":
        raise ConfigError(f"eval mode must be 'oracle' or 'critic', got {mode!r}")
    critic = critic or CriticConfig()
    gm = GenerativeModel(mdp, seed)
    g = np.array([td_evaluate(gm, policy, sig, model, critic).g for sig in mdp.signals()])
    f, active = f_value(g, mdp.thresholds, lam, zeta)
    return {"mode": mode, "g": g.tolist(), "F": f, "active_index": active,
            "feasible": bool(np.all(g[1:] <= mdp.thresholds)),
            "violations": [i + 1 for i in np.nonzero(g[1:] > mdp.thresholds)[0].tolist()]}


__all__ = ["ExperimentConfig", "eval_policy", "oracle_report", "run_experiment", "trace_csv"]
