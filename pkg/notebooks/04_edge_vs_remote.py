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
# # Edge vs remote detection
#
# The same recorded detections are served locally (replay backend) and by a
# stub HTTP detector with injected latency. Counts must agree byte for byte;
# only wall time and the detect-stage latency change.

# %%
import json
from pathlib import Path
import tempfile
import time

import ppe_edge
from ppe_edge.pipeline import PipelineConfig, run
from ppe_edge.stub_server import make_stub_server

DATA = Path(ppe_edge.__file__).parent / "data"
CONFIGS = DATA / "configs"
TMP = Path(tempfile.mkdtemp())

# %%
t0 = time.perf_counter()
local = run(PipelineConfig.load(CONFIGS / "replay_local.json", TMP))
local_s = time.perf_counter() - t0
print(f"local replay: in={local.counts.total_in} out={local.counts.total_out} {local_s:.2f}s")

# %%
results = {}
for latency_ms in (0, 20, 50):
    srv = make_stub_server(DATA / "noisy_crowd_detections.jsonl", latency_ms=latency_ms)
    srv.start_background()
    try:
        d = json.loads((CONFIGS / "remote_stub.json").read_text())
        d["backend"]["remote"]["endpoint"] = srv.url
        t0 = time.perf_counter()
        res = run(PipelineConfig.from_dict(d, CONFIGS, TMP))
        wall = time.perf_counter() - t0
    finally:
        srv.shutdown()
        srv.server_close()
    mean_ms = res.metrics.latency["detect"].to_dict()["mean_us"] / 1000
    same = res.events_jsonl() == local.events_jsonl()
    results[latency_ms] = wall
    print(f"stub {latency_ms:>3} ms: identical={same} wall {wall:.2f}s detect mean {mean_ms:.1f} ms")

# %% [markdown]
# Requests are pipelined (several frames in flight), so wall time grows much
# slower than frames x latency.
