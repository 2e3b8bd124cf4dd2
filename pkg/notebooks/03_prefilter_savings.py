# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Frame prefilter: how much work it saves
#
# Dark frames and frames with too little change against the previous kept frame
# never reach the detector. This matters for a remote detector, where each
# passed frame is an upload.

# %%
import json
from pathlib import Path
import tempfile

import ppe_edge
from ppe_edge.pipeline import PipelineConfig, run

DATA = Path(ppe_edge.__file__).parent / "data"
TMP = Path(tempfile.mkdtemp())

# %%
rows = []
for name in ("idle_periods", "slow_walkers", "lingering", "zero_actor"):
    res = run(PipelineConfig.load(DATA / "configs" / f"{name}.json", TMP))
    m = res.metrics
    rows.append((name, m.frames_examined, m.frames_discarded_brightness, m.frames_discarded_motion,
                 m.frames_discarded / max(m.frames_examined, 1), res.counts.total_in, res.counts.total_out))

print(f"{'config':<13}{'frames':>7}{'dark':>6}{'still':>7}{'dropped':>9}{'in':>4}{'out':>4}")
for name, n, dark, still, frac, cin, cout in rows:
    print(f"{name:<13}{n:>7}{dark:>6}{still:>7}{frac:>9.1%}{cin:>4}{cout:>4}")

# %% [markdown]
# The gate must not change what gets counted. Run the slow scenes again with
# both gates off and compare the event logs.

# %%
for name in ("slow_walkers", "lingering"):
    base = PipelineConfig.load(DATA / "configs" / f"{name}.json", TMP)
    on = run(base)
    d = json.loads((DATA / "configs" / f"{name}.json").read_text())
    d["prefilter"] = {"enabled_gates": []}
    off = run(PipelineConfig.from_dict(d, DATA / "configs", TMP))
    print(name, "identical events:", on.events_jsonl() == off.events_jsonl())
