"""JSON persistence of trained sorting models.

Layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "criteria": [name, ...],
      "scales": [{"alpha", "beta", "direction", "gamma"}, ...],
      "form": "none" | "product" | "minimum",
      "weights": {"marginal_steps": [[...], ...],
                  "eta_plus": [{"pair": [j, k], "values": [[...]]}, ...],
                  "eta_minus": [...]},
      "structure": {"pairs": [[j, k], ...], "signs": [+1 | -1, ...]},
      "normalization": U(a*),
      "labels": [original label of class 1, ..., class q],
      "training": {"C1", "C2", "d", "objective", "policy", "seed", "timestamp"},
      "reference_set": {"ids": [...], "values": [...], "classes": [...]},
      "classifier": {"method": "m1".."m4", "K": int | null}
    }

Criteria indices in pairs are 0-based. Only nonzero interaction matrices
are written; absent pairs load as zero.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import ScoredReferenceSet
from .dataset import CriterionScale
from .encoding import Layout, WeightVector
from .learner import Hyperparams, InteractionStructure, SortingModel

SCHEMA_VERSION = 1
NORMALIZATION_TOL = 1e-8


class ModelFileError(ValueError):
    """Malformed, incompatible or inconsistent model file."""


def build_timestamp() -> str:
    """UTC ISO timestamp; honours SOURCE_DATE_EPOCH for reproducible files."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0))
    return when.isoformat().replace("+00:00", "Z")


@dataclass
class ModelFile:
    model: SortingModel
    criteria: tuple
    references: ScoredReferenceSet
    reference_ids: tuple
    policy: str = "both"
    seed: int = None
    timestamp: str = ""
    method: str = "m2"
    K: int = None
    extra: dict = field(default_factory=dict)

    # ------------------------------------------------------------ serialization
    def to_dict(self) -> dict:
        m = self.model
        w = m.weights

        def etas(table):
            return [{"pair": [int(j), int(k)], "values": np.asarray(v, dtype=float).tolist()}
                    for (j, k), v in sorted(table.items()) if np.any(np.asarray(v) != 0)]

        return {
            "schema_version": SCHEMA_VERSION,
            "criteria": list(self.criteria),
            "scales": [{"alpha": float(s.alpha), "beta": float(s.beta),
                        "direction": s.direction, "gamma": int(s.gamma)} for s in m.scales],
            "form": m.form,
            "weights": {"marginal_steps": [np.asarray(s, dtype=float).tolist() for s in w.marginal_steps],
                        "eta_plus": etas(w.eta_plus), "eta_minus": etas(w.eta_minus)},
            "structure": {"pairs": [list(p) for p in m.structure.pairs],
                          "signs": [int(s) for s in m.structure.signs]},
            "normalization": float(m.ideal_value()),
            "labels": list(m.label_values),
            "training": {"C1": float(m.hyperparams.C1), "C2": float(m.hyperparams.C2),
                         "d": float(m.d), "objective": float(m.objective), "policy": self.policy,
                         "seed": self.seed, "timestamp": self.timestamp, **self.extra},
            "reference_set": {"ids": list(self.reference_ids),
                              "values": [float(v) for v in self.references.values],
                              "classes": [int(c) for c in self.references.classes]},
            "classifier": {"method": self.method, "K": self.K},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    # ------------------------------------------------------------ parsing
    @classmethod
    def from_dict(cls, doc: dict) -> "ModelFile":
        try:
            version = doc["schema_version"]
            if version != SCHEMA_VERSION:
                raise ModelFileError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
            scales = tuple(CriterionScale(alpha=s["alpha"], beta=s["beta"], direction=s["direction"],
                                          gamma=s["gamma"]) for s in doc["scales"])
            criteria = tuple(doc["criteria"])
            if len(criteria) != len(scales):
                raise ModelFileError("criteria and scales differ in length")
            form = doc["form"]
            layout = Layout(tuple(s.gamma for s in scales), form)
            wd = doc["weights"]
            steps = tuple(np.asarray(s, dtype=float) for s in wd["marginal_steps"])
            if tuple(len(s) for s in steps) != layout.gammas:
                raise ModelFileError("marginal steps do not match the scale piece counts")

            def etas(entries):
                out = {}
                for e in entries:
                    pair = tuple(int(i) for i in e["pair"])
                    if pair not in layout.pair_offsets:
                        raise ModelFileError(f"interaction pair {list(pair)} invalid for this layout")
                    mat = np.asarray(e["values"], dtype=float)
                    if mat.shape != (layout.gammas[pair[0]], layout.gammas[pair[1]]):
                        raise ModelFileError(f"interaction matrix for {list(pair)} has shape {mat.shape}")
                    out[pair] = mat
                return out

            weights = WeightVector(steps, etas(wd["eta_plus"]), etas(wd["eta_minus"]), form)
            st = doc["structure"]
            structure = InteractionStructure(tuple(tuple(int(i) for i in p) for p in st["pairs"]),
                                             tuple(int(s) for s in st["signs"]))
            tr = doc["training"]
            model = SortingModel(weights=weights, structure=structure, form=form, scales=scales,
                                 d=float(tr["d"]), objective=float(tr["objective"]),
                                 hyperparams=Hyperparams(float(tr["C1"]), float(tr["C2"])),
                                 label_values=tuple(doc["labels"]))
            rs = doc["reference_set"]
            refs = ScoredReferenceSet(tuple(rs["values"]), tuple(rs["classes"]), len(doc["labels"]))
            known = {"C1", "C2", "d", "objective", "policy", "seed", "timestamp"}
            out = cls(model=model, criteria=criteria, references=refs, reference_ids=tuple(rs["ids"]),
                      policy=tr["policy"], seed=tr["seed"], timestamp=tr["timestamp"],
                      method=doc["classifier"]["method"], K=doc["classifier"]["K"],
                      extra={k: v for k, v in tr.items() if k not in known})
            stored = float(doc["normalization"])
        except (KeyError, TypeError) as exc:
            raise ModelFileError(f"malformed model file: missing or invalid field {exc}") from None
        except ValueError as exc:
            if isinstance(exc, ModelFileError):
                raise
            raise ModelFileError(f"malformed model file: {exc}") from None
        check = model.ideal_value()
        if abs(check - 1.0) > NORMALIZATION_TOL or abs(stored - 1.0) > NORMALIZATION_TOL:
            raise ModelFileError(f"normalization check failed: U(a*) = {check!r} (stored {stored!r})")
        return out

    @classmethod
    def loads(cls, text: str) -> "ModelFile":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"model file is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ModelFile":
        path = Path(path)
        if not path.exists():
            raise ModelFileError(f"no such model file: {path}")
        return cls.loads(path.read_text(encoding="utf-8"))
