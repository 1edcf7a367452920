#!/usr/bin/env python3
"""End-to-end drive of the loramix CLI with independently generated inputs.

Builds a base checkpoint and two LoRA adapters in pure Python, runs the CLI
verbs against them, and re-derives the merge in numpy to check the export.
Exits 0 only if every step behaves.
"""
import json
import os
import struct
import subprocess
import sys
import tempfile

import numpy as np

CLI = sys.argv[1] if len(sys.argv) > 1 else "loramix"
work = tempfile.mkdtemp(prefix="loramix_drive_")
os.chdir(work)
fails = []


def check(cond, label):
    print(("ok   " if cond else "FAIL ") + label)
    if not cond:
        fails.append(label)


def write_st(path, tensors):
    """tensors: list of (name, np.float32 array)."""
    header = {}
    offset = 0
    blobs = []
    for name, arr in tensors:
        raw = arr.astype("<f4").tobytes()
        header[name] = {
            "dtype": "F32",
            "shape": list(arr.shape),
            "data_offsets": [offset, offset + len(raw)],
        }
        offset += len(raw)
        blobs.append(raw)
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(hjson)))
        f.write(hjson)
        for b in blobs:
            f.write(b)


def read_st(path):
    with open(path, "rb") as f:
        n = struct.unpack("<Q", f.read(8))[0]
        header = json.loads(f.read(n))
        body = f.read()
    out = {}
    for name, meta in header.items():
        if name == "__metadata__":
            continue
        s, e = meta["data_offsets"]
        assert meta["dtype"] == "F32", meta
        out[name] = np.frombuffer(body[s:e], dtype="<f4").reshape(meta["shape"])
    return out


def run(*args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    p = subprocess.run([CLI, *args], capture_output=True, text=True, env=env)
    return p.returncode, p.stdout, p.stderr


rng = np.random.default_rng(7)
mods = {"layers.0.q": (16, 16), "layers.1.v": (12, 16)}
base = [(m + ".weight", rng.standard_normal(s).astype(np.float32)) for m, s in mods.items()]
base.append(("embed.weight", rng.standard_normal((4, 3)).astype(np.float32)))
write_st("base.safetensors", base)

adapters = {}
for name, (r, alpha) in {"pt": (2, 16.0), "sft": (3, 24.0)}.items():
    tensors = []
    per_mod = {}
    for m, (dout, din) in mods.items():
        A = rng.standard_normal((r, din)).astype(np.float32)
        B = rng.standard_normal((dout, r)).astype(np.float32)
        tensors += [(m + ".lora_A", A), (m + ".lora_B", B)]
        per_mod[m] = (A, B)
    write_st(name + ".safetensors", tensors)
    with open(name + ".json", "w") as f:
        json.dump({"r": r, "lora_alpha": alpha, "name": name}, f)
    adapters[name] = (r, alpha, per_mod)

spec = {
    "label": "mix",
    "output_dtype": "F32",
    "entries": [
        {"adapter": "pt.safetensors", "weight": 0.3},
        {"adapter": "sft.safetensors", "weight": 0.7},
    ],
}
with open("spec.json", "w") as f:
    json.dump(spec, f)

rc, out, err = run("merge", "--base", "base.safetensors", "--spec", "spec.json", "--out", "export")
check(rc == 0, f"merge exits 0 (rc={rc} err={err.strip()!r})")
check(os.path.exists("export/merged.safetensors"), "merged checkpoint written")
check(os.path.exists("export/merge_manifest.json"), "manifest written")

# independent recomputation of the merge in float32
merged = read_st("export/merged.safetensors")
weights = {"pt": 0.3, "sft": 0.7}
worst = 0.0
for m, _ in mods.items():
    exp = None
    for nm, arr in base:
        if nm == m + ".weight":
            exp = arr.copy()
    for name, (r, alpha, per_mod) in adapters.items():
        A, B = per_mod[m]
        delta = (alpha / r) * (B @ A)
        exp = exp + np.float32(weights[name]) * delta.astype(np.float32)
    worst = max(worst, float(np.max(np.abs(merged[m + ".weight"] - exp))))
check(worst <= 1e-4, f"numpy recomputation agrees (max abs diff {worst:.2e})")
check(np.array_equal(merged["embed.weight"], dict(base)["embed.weight"]),
      "untargeted tensor untouched")

rc, out, _ = run("--json", "verify", "--base", "base.safetensors", "--spec", "spec.json",
                 "--candidate", "export/merged.safetensors")
doc = json.loads(out)
check(rc == 0 and doc["verdict"] == "Pass", "verify passes on the fresh export")

# flip one payload byte and expect a localized failure
blob = bytearray(open("export/merged.safetensors", "rb").read())
blob[-2] ^= 0x3F
open("tampered.safetensors", "wb").write(bytes(blob))
rc, out, _ = run("--json", "verify", "--base", "base.safetensors", "--spec", "spec.json",
                 "--candidate", "tampered.safetensors")
doc = json.loads(out)
check(rc == 2 and doc["verdict"] == "Fail" and len(doc["failing_tensors"]) == 1,
      "verify localizes a single flipped byte")

rc, out, _ = run("--json", "attribute", "--base", "base.safetensors", "--spec", "spec.json",
                 "--candidate", "export/merged.safetensors")
doc = json.loads(out)
got = doc["inferred_weights"]
check(rc == 0 and abs(got["pt"] - 0.3) < 1e-3 and abs(got["sft"] - 0.7) < 1e-3,
      f"attribute recovers 0.3/0.7 (got {got})")
check(doc["best_hypothesis"] == "mix", "declared recipe wins classification")

rc, out, _ = run("--json", "fingerprint", "export/merged.safetensors")
doc = json.loads(out)
check(rc == 0 and len(doc["digest"]) == 64, "fingerprint emits a 64-hex digest")

# second merge with different weights must refuse to overwrite
spec2 = dict(spec, entries=[
    {"adapter": "pt.safetensors", "weight": 0.5},
    {"adapter": "sft.safetensors", "weight": 0.5},
])
with open("spec2.json", "w") as f:
    json.dump(spec2, f)
before = open("export/merged.safetensors", "rb").read()
rc, _, err = run("merge", "--base", "base.safetensors", "--spec", "spec2.json", "--out", "export")
after = open("export/merged.safetensors", "rb").read()
check(rc == 2 and before == after, "overwrite guard blocks a different recipe")

records = [
    {"id": "r0", "generation": "<think>dose math</think>take 500 mg twice daily",
     "reference": "take 500 mg twice daily"},
    {"id": "r1", "generation": "drink plenty of water", "reference": "drink plenty of water"},
]
with open("eval.jsonl", "w") as f:
    for r in records:
        f.write(json.dumps(r) + "\n")
rc, out, _ = run("eval", "--records", "eval.jsonl", "--label", "drive")
doc = json.loads(out)
check(rc == 0 and doc["bleu4"] == 100.0 and doc["scored_on"] == "StrippedAnswer",
      f"eval strips think and scores 100 (got {doc['bleu4']})")

span = "the counselor documented the full dosing schedule for the newly admitted patient cohort"
with open("leak_train.jsonl", "w") as f:
    f.write(json.dumps({"id": "t0", "text": f"during intake {span} before lunch"}) + "\n")
with open("leak_eval.jsonl", "w") as f:
    f.write(json.dumps({"id": "e0", "text": f"note that {span} yesterday"}) + "\n")
    f.write(json.dumps({"id": "e1", "text": "unrelated hydration advice"}) + "\n")
rc, out, _ = run("leak-audit", "--train", "leak_train.jsonl", "--eval", "leak_eval.jsonl")
doc = json.loads(out)
check(rc == 2 and doc["contaminated_eval"] == 1, "leak audit flags the planted 13-token span")

with open("messages.jsonl", "w") as f:
    f.write(json.dumps({"role": "user", "content": "hi"}) + "\n")
rc, out, _ = run("render", "--messages", "messages.jsonl", "--template", "qwen3_nothink")
check(rc == 0 and out.rstrip("\n").endswith("<think>\n\n</think>"),
      "render appends the nothink prefill")

rc, _, _ = run("render", "--messages", "messages.jsonl", "--template", "alpaca")
check(rc == 3, "unknown template id exits 3")

print()
if fails:
    print(f"DRIVE FAILED ({len(fails)}): " + "; ".join(fails))
    sys.exit(1)
print("drive clean: 15 checks passed")
