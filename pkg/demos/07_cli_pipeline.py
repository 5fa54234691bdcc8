"""Driving the command-line pipeline and replaying a manifest.

Runs synth and single-channel decoding through the installed CLI, then
reruns the decoding step from the manifest it wrote and verifies every
output byte matches. Any manifest doubles as a config file, so a finished
run is also the recipe to reproduce it.
"""

import filecmp
import json
import subprocess
import sys
import tempfile
from pathlib import Path

SYNTH = {
    "n_channels": 2, "duration_s": 110.0, "n_events": 44,
    "error_rate": 0.35, "channel_groups": {"frontal": [0]}, "seed": 0,
}


def run(args):
    cmd = [sys.executable, "-m", "errdecode", *map(str, args)]
    print(f"$ errdecode {' '.join(map(str, args))}")
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"exit {proc.returncode}: {proc.stderr}")
    return proc


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        synth_json = tmp / "synth.json"
        synth_json.write_text(json.dumps(SYNTH))

        run(["synth", "--synth", synth_json, "--out", tmp / "data"])
        run(["single", "--synth", synth_json, "--classifier", "rlda",
             "--n-perm", 500, "--out", tmp / "run1"])

        manifest = json.loads((tmp / "run1" / "manifest.json").read_text())
        print(f"manifest records command {manifest['command']!r} "
              f"and outputs {manifest['outputs']}")

        run(["single", "--config", tmp / "run1" / "manifest.json",
             "--out", tmp / "run2"])

        files = sorted(p.name for p in (tmp / "run1").iterdir())
        match, mismatch, errors = filecmp.cmpfiles(
            tmp / "run1", tmp / "run2", files, shallow=False
        )
        print(f"replay comparison: {len(match)} identical, "
              f"{len(mismatch)} different, {len(errors)} missing")
        assert not mismatch and not errors

        table = (tmp / "run1" / "channels.csv").read_text().splitlines()
        print("\n".join(table))


if __name__ == "__main__":
    main()
