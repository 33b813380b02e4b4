import json
import math
import os
import subprocess
from pathlib import Path

import pytest

import stifflab

CLI = os.environ.get("STIFFLAB_CLI")
PRESETS = Path(os.environ.get("STIFFLAB_PRESETS", Path(__file__).resolve().parents[2] / "presets"))

BROWNIAN = {"box_half_width": 5, "grid": {"h": 0.01}, "phase": {"kind": "snapping", "kappa": 2}}


def test_version():
    assert stifflab.__version__ == "0.1.0"


def test_assemble_interface_weight():
    form = stifflab.assemble(BROWNIAN)
    zm = form["side"].index("+") - 1
    assert form["side"][zm] == "-"
    assert form["conductance"][zm] == pytest.approx(0.5)
    assert sum(form["mass"]) == pytest.approx(10.0)


def test_resolvent_of_constant():
    out = stifflab.resolvent(BROWNIAN, 2.0, "one")
    assert max(abs(u - 0.5) for u in out["u"]) < 1e-12


def test_identity_and_errors():
    sc = dict(BROWNIAN, phase="separate")
    r = stifflab.resolvent_identity(sc, 2.0, 1.0)
    assert r["max_abs_error"] < 1e-9
    with pytest.raises(ValueError):
        stifflab.assemble(dict(BROWNIAN, phase={"kind": "snapping"}))


def test_sweep_preset():
    cfg = json.loads((PRESETS / "lejay-semi.json").read_text())
    rep = stifflab.sweep(cfg)
    assert rep["pass"]
    assert rep["target_phase"].startswith("snapping")


def test_snob_against_closed_form():
    kappa, T = 2.0, 1.0
    exact = 0.5 * (1 - 2 * math.exp(kappa**2 * T / 2) * 0.5 * math.erfc(kappa * math.sqrt(T) / math.sqrt(2)))
    mean, se = stifflab.snob_minus_fraction(kappa, 1e-3, T, 4000, seed=3)
    assert abs(mean - exact) < 4 * se + 5e-3


@pytest.mark.skipif(CLI is None, reason="STIFFLAB_CLI not set")
@pytest.mark.parametrize("preset,args,code", [
    ("solve-continuous.json", ["solve", "resolvent"], 0),
    ("skew-interface.json", ["solve", "resolvent"], 0),
    ("invalid-barrier.json", ["solve", "resolvent"], 2),
    ("lejay-permeable.json", ["sweep"], 0),
])
def test_cli_presets(tmp_path, preset, args, code):
    p = subprocess.run([CLI, *args, "--config", str(PRESETS / preset), "--out-dir", str(tmp_path)],
                       capture_output=True, text=True)
    assert p.returncode == code, p.stdout + p.stderr
    if code == 0:
        assert (tmp_path / "manifest.json").exists()
