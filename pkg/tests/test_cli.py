import io
import json
import subprocess
import sys

import pytest

from dqw.cli import run


def call(*argv):
    out = io.StringIO()
    code = run([*argv, "--format", "json"], out)
    return code, json.loads(out.getvalue())


def test_assoc_passes():
    code, rep = call("assoc", "--product", "moyal:torus2", "--order", "4")
    assert code == 0 and rep["status"] == "pass" and rep["unital"]


def test_json_output_is_byte_identical():
    outs = []
    for _ in range(2):
        buf = io.StringIO()
        run(["selftest", "--seed", "7", "--format", "json"], buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["status"] == "pass"


def test_exp_and_log():
    code, rep = call("exp", "--product", "moyal:torus2", "--h", "L*E[1,0]", "--order", "3", "--check")
    assert code == 0 and rep["exp"][1] == "E[1,0]"
    code, rep = call("log", "--product", "moyal:poly2", "--u", "1 + L*x1", "--order", "3")
    assert code == 0 and rep["log"][2] == "-1/2*x1^2"


def test_tau(tmp_path):
    spec = {"model": "poly2", "poisson": [[0, 1], [-1, 0]], "order": 3, "builtin": "moyal",
            "corrections": [[[0, "1/2"], ["-1/2", 0]]]}
    p = tmp_path / "shifted.json"
    p.write_text(json.dumps(spec))
    code, rep = call("tau", "--left", str(p), "--right", "moyal:poly2", "--order", "3")
    assert code == 0
    assert rep["tau"] == rep["cochain_formula"] == rep["commutator_formula"]
    assert rep["tau_text"] == "(i/2)*d2f*d1g + (-i/2)*d1f*d2g"


def test_delta_and_innerform():
    code, rep = call("delta", "--product", "moyal:torus2", "--form", "1,0", "--order", "3")
    assert code == 0 and rep["stages"][1] == "(i)*d2"
    code, rep = call("innerform", "--u", "E[1,0]", "--order", "4")
    assert code == 0 and rep["integral"] and rep["verified"]
    assert rep["forms"][0]["constant"] == ["i", "0"]


def test_conn():
    code, rep = call("conn", "--pi", "0,1;-1,0", "--alpha", "E[1,0]*d1", "--curvature", "--class", "--witness")
    assert code == 0 and not rep["alpha_is_poisson"] and rep["class"] is None
    code, rep = call("conn", "--pi", "0,1;-1,0", "--alpha", "(i/2)*d2", "--class", "--witness")
    assert rep["class"] == ["i/2", "0"] and rep["witness"] is None
    code, rep = call("conn", "--pi", "0,1;-1,0", "--alpha", "i*d2", "--witness")
    assert rep["witness"] == "E[1,0]"


def test_bimodule():
    code, rep = call("bimodule", "--product", "moyal:torus2", "--direction", "i*d2", "--order", "3", "--moduli")
    assert code == 0 and rep["roundtrip"] and rep["moduli"]["dimensions"] == [2] * 4


def test_bimodule_non_poisson_is_math_error():
    code, rep = call("bimodule", "--product", "moyal:torus2", "--direction", "E[1,0]*d1", "--order", "2")
    assert code == 1 and rep["status"] == "error" and rep["error"] == "NotQuantizable"


def test_classify(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"rank": 1, "terms": [[3], [0]], "torsion": [2]}))
    (tmp_path / "g.json").write_text(json.dumps({"generators": [[[-1]]]}))
    code, rep = call("classify", "image", "--class", str(tmp_path / "c.json"), "--group", str(tmp_path / "g.json"), "--full")
    assert code == 0 and {tuple(e["free"]) for e in rep["image"]} == {(0,), (-6,)}
    assert rep["group_closed"] and len(rep["image_cl"]) == 4
    code, rep = call("classify", "kernel", "--model", "torus2", "--order", "3")
    assert rep["descriptor"]["higher_ranks"] == [2, 2, 2]


def test_witness():
    code, rep = call("witness", "--v", "1/2,0", "--symbols", "s:1/3,0", "--oracle-bound", "3")
    assert code == 0 and rep["certificate"]["l"] == [1, 0] and rep["certificate"]["verified_bound"] == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["assoc"],
        ["assoc", "--product", "nope.json"],
        ["exp", "--product", "moyal:torus2", "--h", "L*E[1,"],
        ["conn", "--pi", "0,1;-1,0", "--model", "poly4"],
        ["classify", "image"],
        ["witness", "--v", "1/2", "--symbols", "s1/3"],
        ["assoc", "--product", "moyal:torus2", "--order", "-1"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        code = run(argv, io.StringIO())
        raise SystemExit(code)
    assert info.value.code == 2


def test_timing_flag_adds_elapsed():
    buf = io.StringIO()
    run(["witness", "--v", "1/2", "--timing", "--format", "json"], buf)
    assert "elapsed" in json.loads(buf.getvalue())


def test_text_format_and_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dqw.cli", "witness", "--v", "1/2"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "certificate.l: [1]" in proc.stdout
