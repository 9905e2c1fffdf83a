#!/usr/bin/env python3
# Copyright 2026 The vcgnn Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Summarizes a vcgnn metrics stream (JSON lines) per phase.

Usage: summarize_metrics.py [--json] [FILE ...]   (stdin when no file)
Exits 1 if any line is not a JSON object.
"""

import argparse
import collections
import json
import sys


def summarize(lines):
  phases = collections.OrderedDict()
  other = collections.Counter()
  losses = []
  for number, line in enumerate(lines, 1):
    line = line.strip()
    if not line:
      continue
    try:
      rec = json.loads(line)
    except json.JSONDecodeError as e:
      raise ValueError(f"line {number}: {e}") from e
    if not isinstance(rec, dict):
      raise ValueError(f"line {number}: not a JSON object")
    kind = rec.get("type", "unknown")
    if kind != "phase":
      other[kind] += 1
      continue
    p = phases.setdefault(rec["phase"], {
        "records": 0, "wall_ns": 0, "bytes_transferred": 0,
        "translations": 0, "counters": collections.Counter()})
    p["records"] += 1
    p["wall_ns"] += rec.get("wall_ns", 0)
    p["bytes_transferred"] += rec.get("bytes_transferred", 0)
    p["translations"] += rec.get("translations", 0)
    p["counters"].update(rec.get("counters", {}))
    if "loss" in rec:
      losses.append(rec["loss"])
  out = {"phases": {}, "other_records": dict(other)}
  for name, p in phases.items():
    out["phases"][name] = {
        "records": p["records"],
        "total_ms": p["wall_ns"] / 1e6,
        "mean_ms": p["wall_ns"] / 1e6 / p["records"],
        "bytes_transferred": p["bytes_transferred"],
        "translations": p["translations"],
        "counters": dict(p["counters"]),
    }
  if losses:
    out["loss"] = {"first": losses[0], "last": losses[-1], "steps": len(losses)}
  return out


def main():
  parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
  parser.add_argument("files", nargs="*")
  parser.add_argument("--json", action="store_true", help="print JSON instead of a table")
  args = parser.parse_args()
  lines = []
  if args.files:
    for path in args.files:
      with open(path) as f:
        lines.extend(f)
  else:
    lines = sys.stdin.readlines()
  try:
    summary = summarize(lines)
  except (ValueError, KeyError) as e:
    print(f"error: {e}", file=sys.stderr)
    return 1
  if args.json:
    print(json.dumps(summary, indent=2))
    return 0
  print(f"{'phase':<8} {'records':>8} {'total_ms':>12} {'mean_ms':>10} {'bytes':>14} {'transl':>7}")
  for name, p in summary["phases"].items():
    print(f"{name:<8} {p['records']:>8} {p['total_ms']:>12.3f} {p['mean_ms']:>10.3f} "
          f"{p['bytes_transferred']:>14} {p['translations']:>7}")
  if "loss" in summary:
    l = summary["loss"]
    print(f"loss: first {l['first']:.6f} last {l['last']:.6f} over {l['steps']} steps")
  return 0


if __name__ == "__main__":
  sys.exit(main())
