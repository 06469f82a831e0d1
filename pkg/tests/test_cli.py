import numpy as np
import pytest

from gsmant import cli, io
from gsmant.mesh import write_gmsh

from conftest import SMALL_DIPOLE

CONFIG = """
[mesh]
path = dipole.msh
[port 1]
kind = coaxial
dims = {a} {b}
{extra}
[sweep]
start = 1.9e9
stop = 2.1e9
count = 2
[solver]
l_max = 8
center = 0 0 0
[output]
directory = out
prefix = d
"""


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_gmsh(SMALL_DIPOLE.mesh(), root / "dipole.msh")
    cfg = root / "run.ini"
    cfg.write_text(CONFIG.format(a=SMALL_DIPOLE.r_inner, b=SMALL_DIPOLE.r_outer, extra=""))
    assert cli.main(["-q", "solve", str(cfg)]) == 0
    return root


def test_solve_outputs(run):
    out = run / "out"
    assert sorted(p.name for p in out.iterdir()) == ["d.s1p", "d_000.gsm", "d_001.gsm"]
    g = io.read_gsm(out / "d_000.gsm")
    assert g.frequency == 1.9e9 and g.basis.l_max == 8
    h = io.read_header(out / "d_000.gsm")
    assert len(h["info"]["config_hash"]) == 16
    f, mats = io.read_touchstone(out / "d.s1p")
    assert np.allclose(f, [1.9e9, 2.1e9]) and np.isclose(mats[0][0, 0], g.Gamma[0, 0], atol=1e-11)


def test_solve_is_deterministic_across_workers(run):
    cfg = run / "run.ini"
    assert cli.main(["-q", "solve", str(cfg), "--out", str(run / "again"), "--jobs", "2"]) == 0
    for name in ("d_000.gsm", "d_001.gsm", "d.s1p"):
        assert (run / "out" / name).read_bytes() == (run / "again" / name).read_bytes()


def test_missing_port_spec_fails_fast(run, tmp_path):
    cfg = tmp_path / "bad.ini"
    text = (run / "run.ini").read_text().replace("[port 1]", "[port 2]")
    cfg.write_text(text.replace("dipole.msh", str(run / "dipole.msh")))
    assert cli.main(["-q", "solve", str(cfg)]) == 2
    assert not (tmp_path / "out").exists()


def test_bad_inputs_exit_codes(run, tmp_path):
    assert cli.main(["-q", "verify", str(tmp_path / "nothing.gsm")]) == 2
    (tmp_path / "junk.gsm").write_bytes(b"not a container")
    assert cli.main(["-q", "verify", str(tmp_path / "junk.gsm")]) == 2
    assert cli.main(["-q", "solve", str(run / "run.ini"), "--l-max", "0", "--out", str(tmp_path)]) == 2


def test_verify_pass_and_fault_injection(run, tmp_path, capsys):
    src = run / "out" / "d_000.gsm"
    assert cli.main(["-q", "verify", str(src)]) == 0
    assert "PASS" in capsys.readouterr().out
    g = io.read_gsm(src)
    T = g.T.copy()
    i = np.argmax(np.abs(T[:, 0]))
    T[i, 0] = -T[i, 0]
    bad = type(g)(g.frequency, g.k, g.port_labels, g.basis, g.Gamma, g.R, T, g.S,
                  g.formulation, g.center, g.radius)
    io.write_gsm(bad, tmp_path / "bad.gsm")
    assert cli.main(["-q", "verify", str(tmp_path / "bad.gsm")]) == 4
    out = capsys.readouterr().out
    assert "reciprocity defect" in out and "FAIL" in out
    # thresholds from a config file
    th = tmp_path / "th.ini"
    th.write_text("[verify]\nunitarity_tol = 1e-30\n")
    assert cli.main(["-q", "verify", str(src), "--config", str(th)]) == 4
    assert cli.main(["-q", "verify", str(src), "--config", str(th), "--unitarity-tol", "1e-2"]) == 0


def test_compress_and_verify_compressed(run, tmp_path, capsys):
    src = run / "out" / "d_000.gsm"
    out = tmp_path / "d.cgsm"
    assert cli.main(["-q", "compress", str(src), "--out", str(out), "--seed", "7"]) == 0
    text = capsys.readouterr().out
    assert "Err =" in text and "memory saving" in text
    h = io.read_header(out)
    assert h["info"]["seed"] == 7 and h["info"]["err"] < 1e-3
    assert cli.main(["-q", "verify", str(out)]) == 0
    assert cli.main(["-q", "verify", str(out), "--reference", str(src)]) == 0
    assert "reconstruction Err" in capsys.readouterr().out
    assert cli.main(["-q", "compress", str(out)]) == 2


def test_compose_direct_and_iterative(run, tmp_path):
    lay = tmp_path / "lay.ini"
    body = "".join(f"[element {i}]\ngsm = {run}/out/d_*.gsm\ncenter = {0.1 * i} 0 0\n" for i in range(3))
    lay.write_text(body)
    assert cli.main(["-q", "compose", str(lay), "--direct", "--out", str(tmp_path / "d.s3p")]) == 0
    assert cli.main(["-q", "compose", str(lay), "--iterative", "--tol", "1e-12",
                     "--out", str(tmp_path / "i.s3p")]) == 0
    f1, m1 = io.read_touchstone(tmp_path / "d.s3p")
    f2, m2 = io.read_touchstone(tmp_path / "i.s3p")
    assert np.allclose(f1, [1.9e9, 2.1e9]) and np.allclose(f1, f2)
    for a, b in zip(m1, m2):
        assert np.abs(a - b).max() < 1e-9
    # overlapping spheres
    lay.write_text(body.replace("center = 0.1 0 0", "center = 0.03 0 0"))
    assert cli.main(["-q", "compose", str(lay)]) == 2
