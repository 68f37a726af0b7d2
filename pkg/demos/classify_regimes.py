"""Point sets K0 / Kc / Kinf and the regime for the four d=2 exponent orderings."""
import pathlib

from gaussmax import classify_field, io

cfg = io.read_mapping(pathlib.Path(__file__).resolve().parents[1] / "configs" / "d2_table.toml")
for case in cfg["classify"]["cases"]:
    model = io.model_from_dict(case["model"])
    rep = classify_field(model, io.charts_from_list(case["charts"]))
    groups = model.covariance.groups
    alphas = tuple(g.alpha for g in groups)
    betas = tuple(t.beta for t in model.variance.terms)
    print(f"{case['name']:40s} alpha={alphas} beta={betas} dims={rep.dims} -> {rep.regime}")
