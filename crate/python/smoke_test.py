"""Smoke test for the mmpm_py extension module.

Build first with `cargo build -p mmpm-py --release`; the script copies the
compiled library next to a temporary import path and exercises each binding.
"""

import importlib
import json
import math
import shutil
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module(tmp):
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libmmpm_py.so"
        if lib.exists():
            shutil.copy(lib, Path(tmp) / ("mmpm_py" + sysconfig.get_config_var("EXT_SUFFIX")))
            sys.path.insert(0, tmp)
            return importlib.import_module("mmpm_py")
    sys.exit("libmmpm_py.so not found; run `cargo build -p mmpm-py --release`")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        m = load_module(tmp)

        assert m.tokenize("Protesters rally in Cairo!") == ["protesters", "rally", "in", "cairo"]
        events = [(0, "demonstrate", ["protest", "rally"]), (1, "meet", ["summit"])]
        assert m.assign_events(["protesters", "rally"], events) == [0]

        # 2x2 map, 2 filters: filter 0 peaks at (0,1), filter 1 at (1,0)
        values = [0.125, 0.0, 0.75, 0.25, 0.375, 0.5, 0.0, 0.125]
        nms = m.nms_per_filter(values, 2, 2, 2)
        assert nms == [0.0, 0.0, 0.75, 0.0, 0.0, 0.5, 0.0, 0.0], nms
        assert m.visual_itemsets(values, 2, 2, 2, 1) == [((0, 1), [0]), ((1, 0), [1])]

        assert m.cell_to_roi(0, 0) == (0, 0, 132, 132)
        assert m.cell_to_roi(5, 5) == (96, 96, 227, 227)

        store = [[1, 2, 3], [1, 2], [2, 3], [1, 2, 9]]
        assert m.support([1, 2], store) == (3, 4)
        assert m.confidence([1, 2], 9, store) == (1, 3)

        # items: filters 0..3, clusters 4..5, events 6..7
        txs = [[0, 1, 4, 6]] * 40 + [[2, 5, 7]] * 30 + [[0, 7]] * 5 + [[3]] * 25
        fast = m.mine(txs, 4, 2, 2)
        slow = m.brute_force_mine(txs, 4, 2, 2)
        assert fast == slow, (fast, slow)
        assert any(p["visual_items"] == [0, 1] and p["text_items"] == [0] and p["event"] == 0 for p in fast)

        # the individual words also appear elsewhere, so the bigram has the highest idf
        corpus = [f"riot police {w}" for w in ["march", "clash", "stand", "wait"] * 3]
        corpus += ["riot downtown"] * 12 + ["police station"] * 12
        names = m.rank_names(corpus, list(range(12)), {"riot": 0, "police": 0, "downtown": 1}, [0])
        assert names[0][0] == "riot police", names

        assert m.activations([[3, 7, 9], [1, 2]], [[3, 7], [1, 5]]) == [1, 0]

        xs = [[1.0, 0.0]] * 10 + [[0.0, 1.0]] * 10
        labels = [0] * 10 + [1] * 10
        model = m.SoftmaxModel(xs, labels, 2)
        assert model.predict([1.0, 0.0]) == 0 and model.predict([0.0, 1.0]) == 1
        assert math.isclose(sum(model.probabilities([1.0, 1.0])), 1.0, abs_tol=1e-9)
        assert model.train_log[-1] < model.train_log[0]

        manifest = json.loads(m.synth_generate(str(Path(tmp) / "synth"), seed=3, total_tx=500))
        assert manifest["documents"] == 500
        assert len(manifest["plants"]) == 5

    print("mmpm_py smoke test: ok")


if __name__ == "__main__":
    main()
