"""
Agents in separate processes sharing one study
==============================================

A store server is started over a file log; three command-line agents then
join the same study through its URL.  Each agent is an independent process
with its own agent id, and all of them see each other's trials.
"""

# %%
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from varexplore.trialstore import FileStore, serve

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 30
work = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(tempfile.mkdtemp(prefix="shared-"))
work.mkdir(parents=True, exist_ok=True)

# %% Serve a file-log store on a free port
backend = FileStore(work / "store.jsonl")
server = serve(backend, "127.0.0.1:0")
server.start()
print("store server at", server.url)

# %% One payload, three agent processes
payload = work / "payload.json"
payload.write_text(json.dumps({
    "workflow_type": "sphere",
    "workflow_options": {"x": [-5.0, 5.0], "y": [-5.0, 5.0]},
    "variational_options": {"num_studies": 1, "num_episodes": episodes, "study_name": "shared-sphere",
                            "sampler_type": "NSGAIISampler"},
}))
procs = [subprocess.Popen([sys.executable, "-m", "varexplore", "run", "--payload", str(payload),
                           "--store", server.url, "--agent-offset", str(a), "--out", str(work / f"agent{a}")],
                          stdout=subprocess.PIPE, text=True)
         for a in range(3)]
for p in procs:
    out, _ = p.communicate()
    print(f"agent process exit {p.returncode}: {out.strip()[:100]}")

server.stop()
backend.close()

# %% The log now holds one study written by three processes
trials = FileStore(work / "store.jsonl").list_trials("shared-sphere")
by_agent = {a: sum(t.agent_id == a for t in trials) for a in sorted({t.agent_id for t in trials})}
best = min((t for t in trials if t.values), key=lambda t: t.values[0])
print(f"{len(trials)} trials, per agent {by_agent}")
print(f"best {best.values[0]:.3g} at x={best.params['x']:.3f}, y={best.params['y']:.3f} (agent {best.agent_id})")
