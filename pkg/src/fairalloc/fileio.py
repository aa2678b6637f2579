"""Population and policy documents (JSON, schema ``format: 1``) and atomic writes."""

import json
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .population import (
    ContextSpec,
    LinearModel,
    LogisticModel,
    Population,
    PopulationError,
    StructuralModel,
    StylizedModel,
    TabularModel,
)

__all__ = [
    "InputError",
    "PopulationDoc",
    "population_to_dict",
    "population_from_dict",
    "load_population",
    "save_population",
    "policy_to_dict",
    "policy_from_dict",
    "atomic_write",
]

FORMAT = 1


def _umask():
    m = os.umask(0)
    os.umask(m)
    return m


_FILE_MODE = 0o666 & ~_umask()


class InputError(ValueError):
    """Malformed or inconsistent input document."""


@dataclass
class PopulationDoc:
    population: Population
    model: Optional[object] = None
    expected_rewards: Optional[np.ndarray] = None
    latent_u: Optional[np.ndarray] = None


def atomic_write(path, data):
    """Write text or bytes to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.chmod(tmp, _FILE_MODE)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _model_to_dict(model):
    if model is None:
        return None
    if isinstance(model, TabularModel):
        return {"kind": "tabular", "sigma": float(model.sigma), "table": model.table.tolist()}
    if isinstance(model, LinearModel):
        return {"kind": "linear", "sigma": float(model.sigma), "theta": model.theta.tolist()}
    if isinstance(model, LogisticModel):
        return {"kind": "logistic", "theta": model.theta.tolist()}
    if isinstance(model, StructuralModel):
        return {
            "kind": "structural", "gamma1": float(model.gamma1), "gamma2": float(model.gamma2),
            "base_logit": model.base_logit.tolist(), "x_dist": model.x_dist.tolist(),
        }
    if isinstance(model, StylizedModel):
        return {"kind": "stylized", "x": model.x.tolist(), "g": model.g.astype(int).tolist()}
    raise TypeError(f"cannot serialize outcome model {type(model).__name__}")


def _model_from_dict(d, pop):
    if d is None:
        return None
    kind = d.get("kind")
    feats = pop.features
    if kind == "tabular":
        return TabularModel(np.array(d["table"], dtype=float), float(d.get("sigma", 1.0)))
    if kind in ("linear", "logistic"):
        if feats is None:
            raise InputError(f"{kind} outcome model needs context features")
        theta = np.array(d["theta"], dtype=float)
        if theta.shape != (feats.shape[2],):
            raise InputError(f"theta has {theta.size} entries, features have dimension {feats.shape[2]}")
        if kind == "linear":
            return LinearModel(feats, theta, float(d.get("sigma", 1.0)))
        return LogisticModel(feats, theta)
    if kind == "structural":
        return StructuralModel(
            np.array(d["base_logit"], dtype=float), np.array(d["x_dist"], dtype=float),
            float(d.get("gamma1", 4.0)), float(d.get("gamma2", -0.75)),
        )
    if kind == "stylized":
        return StylizedModel(np.array(d["x"], dtype=float), np.array(d["g"], dtype=np.int8))
    raise InputError(f"unknown outcome model kind {kind!r}")


def population_to_dict(pop, model=None, expected_rewards=None, latent_u=None):
    contexts = []
    for i, c in enumerate(pop.contexts()):
        row = {
            "id": c.id,
            "prob": c.prob,
            "groups": [g for g in pop.groups if g in c.group_ids],
            "costs": list(c.costs),
        }
        if c.features is not None:
            row["features"] = [list(f) for f in c.features]
        if expected_rewards is not None:
            row["expected_rewards"] = np.asarray(expected_rewards, dtype=float)[i].tolist()
        contexts.append(row)
    doc = {
        "format": FORMAT,
        "actions": list(pop.actions),
        "groups": list(pop.groups),
        "contexts": contexts,
        "outcome_model": _model_to_dict(model),
    }
    if latent_u is not None:
        doc["latent_u"] = np.asarray(latent_u, dtype=float).tolist()
    return doc


def population_from_dict(doc):
    try:
        if doc.get("format") != FORMAT:
            raise InputError(f"unsupported population format {doc.get('format')!r}")
        actions = doc["actions"]
        groups = doc["groups"]
        specs, rewards = [], []
        for row in doc["contexts"]:
            specs.append(ContextSpec(
                row["id"], float(row["prob"]), frozenset(row["groups"]),
                tuple(row["costs"]), row.get("features"),
            ))
            rewards.append(row.get("expected_rewards"))
        pop = Population.from_contexts(specs, actions, groups)
        f = None
        if any(r is not None for r in rewards):
            if any(r is None for r in rewards):
                raise InputError("expected_rewards must be given for all contexts or none")
            f = np.array(rewards, dtype=float)
            if f.shape != (pop.n_contexts, pop.n_actions) or not np.isfinite(f).all():
                raise InputError("expected_rewards must be finite, one per action")
        model = _model_from_dict(doc.get("outcome_model"), pop)
        u = doc.get("latent_u")
        u = None if u is None else np.array(u, dtype=float)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed population document: {exc!r}") from exc
    except PopulationError as exc:
        raise InputError(str(exc)) from exc
    return PopulationDoc(pop, model, f, u)


def load_population(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    return population_from_dict(doc)


def dumps(doc):
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save_population(path, pop, model=None, expected_rewards=None, latent_u=None):
    atomic_write(path, dumps(population_to_dict(pop, model, expected_rewards, latent_u)))


def policy_to_dict(pop, assignment, **extra):
    v = np.asarray(assignment, dtype=float)
    doc = {
        "format": FORMAT,
        "actions": list(pop.actions),
        "policy": [{"id": cid, "probs": v[i].tolist()} for i, cid in enumerate(pop.ids)],
    }
    doc.update(extra)
    return doc


def policy_from_dict(doc, pop):
    try:
        rows = {r["id"]: r["probs"] for r in doc["policy"]}
        v = np.array([rows[cid] for cid in pop.ids], dtype=float)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed policy document: {exc!r}") from exc
    if v.shape != (pop.n_contexts, pop.n_actions):
        raise InputError("policy rows do not match the population actions")
    return v
