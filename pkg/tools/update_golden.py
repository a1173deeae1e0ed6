"""Regenerate tests/golden/mini_city from the bundled fixture."""
import shutil
import sys
import tempfile
from pathlib import Path

from healthyparks.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIG = ROOT / "configs" / "mini_city.toml"
GOLDEN = ROOT / "tests" / "golden" / "mini_city"

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    for cmd in ("ingest", "score", "equity", "validate", "export"):
        if main(["--config", str(CONFIG), "--out", str(out), cmd]) != 0:
            sys.exit(f"{cmd} failed")
    if main(["--config", str(CONFIG), "--out", str(out / "mini_city"), "eval"]) != 0:
        sys.exit("eval failed")
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    shutil.copytree(out / "mini_city", GOLDEN)
print(f"wrote {GOLDEN}")
