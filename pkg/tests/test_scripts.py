import importlib.util
from pathlib import Path

import math

from racecms import harness
from racecms.ingest import save_dataset
from racecms.synthetic import planted_dataset

SCRIPT = Path(__file__).resolve().parent.parent / "scripts" / "reproduce_gplus.py"


def _load():
    spec = importlib.util.spec_from_file_location("reproduce_gplus", SCRIPT)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_relabel_handles_ids_wider_than_64_bits():
    mod = _load()
    lines = ["# header", "116374117927631468606 99999999999999999999", "99999999999999999999 7"]
    assert list(mod.relabel(lines)) == ["# header", "0 1", "1 2"]


def test_reproduce_summary_on_small_grid(tmp_path, monkeypatch):
    mod = _load()
    ds, _ = planted_dataset(n=1500, n_queries=30, universe=20_000, seed=3)
    cache = tmp_path / "s.rdsc"
    save_dataset(ds, cache)
    monkeypatch.setitem(harness.DEFAULT_GRIDS, "map_race",
                        {"K": [1], "d": [2], "w": [200], "R": [2], "r": [100], "bits": [8]})
    monkeypatch.setitem(harness.DEFAULT_GRIDS, "random_projection", {"m": [5, 400]})
    out = mod.reproduce(str(cache), queries=20, budget=1.0, output=str(tmp_path / "o.csv"))
    assert 0.0 <= out["race_recall_at_5pct"] <= 1.0
    assert out["projection_bytes_factor"] > 0 or math.isinf(out["projection_bytes_factor"])
    assert len(harness.read_csv(tmp_path / "o.csv")) == 3
