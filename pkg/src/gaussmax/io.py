"""Model and experiment files (TOML or JSON) with bit-exact float round trips."""
from __future__ import annotations

import hashlib
import json
import os
import sys

from .classify import ManifoldChart
from .errors import ConfigError, ModelError
from .model import (
    CallableVariance,
    CoordinateGroup,
    FieldModel,
    GentleExpVariance,
    PowerSumVariance,
    PowerTerm,
    RatioFormVariance,
    SlowlyVarying,
    StructuredCovariance,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w


# -- slowly varying / groups / variance -------------------------------------


def sv_to_dict(sv):
    if sv.kind == "constant":
        return {"kind": "constant", "c": sv.c}
    if sv.kind == "logpower":
        return {"kind": "logpower", "a": sv.a}
    return {"kind": "product", "factors": [sv_to_dict(f) for f in sv.factors]}


def sv_from_dict(d):
    if d is None:
        return SlowlyVarying()
    kind = d.get("kind", "constant")
    if kind == "constant":
        return SlowlyVarying.constant(d.get("c", 1.0))
    if kind == "logpower":
        return SlowlyVarying.logpower(d["a"])
    if kind == "product":
        return SlowlyVarying.product(*[sv_from_dict(f) for f in d["factors"]])
    raise ModelError(f"unknown slowly varying kind {kind!r}")


def variance_to_dict(v):
    if isinstance(v, PowerSumVariance):
        return {"kind": "power_sum", "on": v.on, "sigma2_min": v.sigma2_min,
                "terms": [{"coord": t.coord, "c": t.c, "beta": t.beta, "sv": sv_to_dict(t.sv)} for t in v.terms]}
    if isinstance(v, GentleExpVariance):
        beta = list(v.beta) if isinstance(v.beta, tuple) else v.beta
        return {"kind": "gentle_exp", "beta": beta, "sigma2_min": v.sigma2_min}
    if isinstance(v, RatioFormVariance):
        return {"kind": "ratio_form", "sv": sv_to_dict(v.sv), "sigma2_min": v.sigma2_min}
    if isinstance(v, CallableVariance):
        raise ModelError("callable variances have no file form")
    raise ModelError(f"cannot serialize variance {type(v).__name__}")


def variance_from_dict(d):
    if d is None:
        return PowerSumVariance(())
    kind = d.get("kind", "power_sum")
    s2 = d.get("sigma2_min", 1e-6)
    if kind == "power_sum":
        terms = tuple(PowerTerm(int(t["coord"]), float(t["c"]), float(t["beta"]), sv_from_dict(t.get("sv")))
                      for t in d.get("terms", []))
        return PowerSumVariance(terms, d.get("on", "variance"), s2)
    if kind == "gentle_exp":
        b = d["beta"]
        return GentleExpVariance(tuple(b) if isinstance(b, list) else float(b), s2)
    if kind == "ratio_form":
        return RatioFormVariance(sv_from_dict(d.get("sv")), s2)
    raise ModelError(f"unknown variance kind {kind!r}")


def model_to_dict(model):
    cov = model.covariance
    out = {
        "domain": {"lo": list(model.lo), "hi": list(model.hi)},
        "covariance": {
            "form": cov.form,
            "groups": [{"coords": list(g.coords), "alpha": g.alpha, "coef": g.coef, "sv": sv_to_dict(g.sv)}
                       for g in cov.groups],
        },
        "variance": variance_to_dict(model.variance),
    }
    if cov.rotation is not None:
        out["covariance"]["rotation"] = [list(r) for r in cov.rotation]
    return out


def model_from_dict(d):
    try:
        c = d["covariance"]
        groups = tuple(CoordinateGroup(tuple(g["coords"]), float(g["alpha"]), sv_from_dict(g.get("sv")),
                                       float(g.get("coef", 1.0))) for g in c["groups"])
        rot = c.get("rotation")
        cov = StructuredCovariance(groups, tuple(tuple(r) for r in rot) if rot else None,
                                   c.get("form", "sum_then_exp"))
        dom = d.get("domain", {})
        dim = cov.dimension
        lo = dom.get("lo", [-1.0] * dim)
        hi = dom.get("hi", [1.0] * dim)
        return FieldModel(cov, variance_from_dict(d.get("variance")), tuple(lo), tuple(hi))
    except KeyError as exc:
        raise ModelError(f"model description lacks {exc}") from None


# -- files ------------------------------------------------------------------


def _fmt(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".toml", ".tml"):
        return "toml"
    if ext == ".json":
        return "json"
    raise ConfigError(f"unsupported file type {ext!r} for {path}")


def read_mapping(path):
    """Parse a TOML or JSON file into a dict.

    Raises
    ------
    ConfigError
        Missing file or unparsable content, naming the path.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"file not found: {path}")
    fmt = _fmt(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        if fmt == "toml":
            return tomllib.loads(raw.decode("utf-8"))
        return json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def write_mapping(data, path):
    fmt = _fmt(path)
    with open(path, "wb") as fh:
        if fmt == "toml":
            fh.write(tomli_w.dumps(data).encode("utf-8"))
        else:
            fh.write(json.dumps(data, indent=2, sort_keys=True).encode("utf-8"))


def load_model(path):
    data = read_mapping(path)
    return model_from_dict(data.get("model", data))


def dump_model(model, path):
    write_mapping({"model": model_to_dict(model)}, path)


def charts_from_list(items):
    return [ManifoldChart.from_dict(c) for c in items]


def config_hash(data):
    """SHA-256 of the canonical JSON form of a parsed config."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True, default=str)
    return hashlib.sha256(blob.encode("ascii")).hexdigest()
