import json
import os
import stat

import pytest

from hamsym.cli import main
from hamsym.systemio import (
    BUNDLED_EXAMPLES,
    SystemFileError,
    load_system_file,
    parse_system_text,
    write_system_file,
)


@pytest.fixture()
def example_dir(tmp_path):
    target = tmp_path / "examples"
    assert main(["examples", "--install", str(target)]) == 0
    return target


# -- file format ---------------------------------------------------------------

def test_bundled_examples_parse_and_validate():
    for fname, text in BUNDLED_EXAMPLES.items():
        sf = parse_system_text(text, name_hint=fname)
        assert sf.space.n == 2
        assert sf.hamiltonian is not None
        assert sf.symmetries
        assert sf.verify["x0"]


def test_round_trip_through_writer(tmp_path):
    for fname, text in BUNDLED_EXAMPLES.items():
        sf = parse_system_text(text, name_hint=fname)
        out = tmp_path / fname
        write_system_file(sf, str(out))
        again = load_system_file(str(out))
        assert again.name == sf.name
        assert again.space.coords == sf.space.coords
        assert again.space.parameters == sf.space.parameters
        assert again.hamiltonian == sf.hamiltonian
        assert [c.name for c in again.symmetries] == [c.name for c in sf.symmetries]
        for a, b in zip(again.symmetries, sf.symmetries):
            assert a.field.components == b.field.components
        assert again.verify == sf.verify


def test_parameter_without_value_probes_positive():
    text = """\
dof: 1
coordinates: q p
parameter: mass
hamiltonian: p^2/(2*mass)
"""
    sf = parse_system_text(text)
    assert sf.space.parameters == {"mass": 1.0}


def test_explicit_symplectic_block(tmp_path):
    text = """\
name: twisted
dof: 1
coordinates: q p
symplectic: explicit
symplectic-term: q p = 2
hamiltonian: (q^2 + p^2)/2
"""
    sf = parse_system_text(text)
    assert sf.symplectic != "canonical"
    [(coeff, i, j)] = sf.symplectic
    assert (i, j) == (0, 1)
    path = tmp_path / "twisted.sys"
    write_system_file(sf, str(path))
    assert load_system_file(str(path)).symplectic_texts == [("q", "p", "2")]


@pytest.mark.parametrize("mutation, fragment", [
    ("hamiltonian: q1 +", "bad hamiltonian"),
    ("symmetry: S = 1 | 2", "components"),
    ("coordinates: q1 q1 p1 p1", "distinct"),
    ("dof: two", "bad dof"),
    ("frequency: 3", "unknown key"),
    ("domain: q1 = 1", "domain"),
])
def test_file_errors_have_diagnostics(mutation, fragment):
    base = [
        "dof: 2",
        "coordinates: q1 q2 p1 p2",
        "hamiltonian: (p1^2 + p2^2 + q1^2 + q2^2)/2",
    ]
    key = mutation.split(":")[0]
    lines = [ln for ln in base if not ln.startswith(key + ":")]
    lines.append(mutation)
    with pytest.raises(SystemFileError) as err:
        parse_system_text("\n".join(lines))
    assert fragment.lower() in str(err.value).lower()


# -- CLI ----------------------------------------------------------------------

def test_cli_check_pendulum(example_dir, capsys):
    code = main(["check", str(example_dir / "pendulum.sys")])
    out = capsys.readouterr().out
    assert code == 0
    assert "dtheta/dt = p_theta" in out
    assert "dphi/dt = p_phi*tan(theta)^2 + p_phi" in out
    assert "symbolic-zero" in out


def test_cli_check_rejects_degenerate(tmp_path, capsys):
    bad = tmp_path / "degenerate.sys"
    bad.write_text(
        "dof: 2\ncoordinates: q1 q2 p1 p2\nsymplectic: explicit\n"
        "symplectic-term: q1 q2 = 1\n"
        "hamiltonian: p1\n",
        encoding="utf-8",
    )
    code = main(["check", str(bad)])
    err = capsys.readouterr().err
    assert code == 2
    assert "degenerate" in err


def test_cli_check_rejects_malformed_expression(tmp_path, capsys):
    bad = tmp_path / "broken.sys"
    bad.write_text(
        "dof: 1\ncoordinates: q p\nhamiltonian: q +\n", encoding="utf-8")
    code = main(["check", str(bad)])
    err = capsys.readouterr().err
    assert code == 2
    assert "position" in err


def test_cli_classify_text(example_dir, capsys):
    code = main(["classify", str(example_dir / "pendulum.sys")])
    out = capsys.readouterr().out
    assert code == 0
    assert "Y_rot: Noether" in out
    assert "conserved [noether-potential]: p_phi" in out


def test_cli_classify_unknown_symmetry(example_dir, capsys):
    code = main(["classify", str(example_dir / "pendulum.sys"),
                 "--symmetry", "nope"])
    assert code == 2
    assert "unknown symmetry" in capsys.readouterr().err


def test_cli_classify_structured_deterministic(example_dir, capsys):
    outputs = []
    for _ in range(2):
        code = main(["classify", str(example_dir / "iso_oscillator.sys"),
                     "--seed", "42", "--format", "structured"])
        assert code == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]
    doc = json.loads(outputs[0])
    assert doc["seed"] == 42
    assert doc["system"]["name"] == "isotropic-oscillator"
    kinds = {cand["candidate"]: cand["label"]["kind"] for cand in doc["candidates"]}
    assert kinds["Y"] == "OmegaEigenOrderN"
    assert kinds["Xh1"] == "Noether"


def test_cli_verify_pendulum_pass(example_dir, capsys):
    code = main(["verify", str(example_dir / "pendulum.sys")])
    out = capsys.readouterr().out
    assert code == 0
    assert "[pass]" in out
    assert "FAIL" not in out


def test_cli_verify_all_bundled_systems_pass(example_dir, capsys):
    # every quantity the classifier emits on the bundled systems must stay
    # below the default drift threshold under the documented run
    for fname in ("iso_oscillator.sys", "aniso_oscillator.sys"):
        code = main(["verify", str(example_dir / fname)])
        out = capsys.readouterr().out
        assert code == 0, out
        assert "FAIL" not in out


def test_cli_verify_nonconserved_quantity_fails(example_dir, capsys):
    code = main(["verify", str(example_dir / "iso_oscillator.sys"),
                 "--quantity", "q1"])
    out = capsys.readouterr().out
    assert code == 1
    assert "[FAIL]" in out


def test_cli_verify_unknown_quantity_symbol(example_dir, capsys):
    code = main(["verify", str(example_dir / "iso_oscillator.sys"),
                 "--quantity", "nope"])
    assert code == 2
    assert "quantity" in capsys.readouterr().err


def test_cli_verify_requires_run_parameters(tmp_path, capsys):
    f = tmp_path / "bare.sys"
    f.write_text("dof: 1\ncoordinates: q p\nhamiltonian: p^2/2\n",
                 encoding="utf-8")
    code = main(["verify", str(f)])
    assert code == 2
    assert "run parameters" in capsys.readouterr().err


def test_cli_verify_dump(example_dir, tmp_path, capsys):
    dump = tmp_path / "traj.txt"
    code = main(["verify", str(example_dir / "iso_oscillator.sys"),
                 "--quantity", "p1*p2 + Omega^2*q1*q2",
                 "--t-final", "1.0", "--dump", str(dump)])
    capsys.readouterr()
    assert code == 0
    lines = dump.read_text().splitlines()
    assert lines[0].startswith("# t ")
    assert len(lines) == 1002


def test_cli_examples_idempotent(example_dir):
    before = sorted(os.listdir(example_dir))
    assert main(["examples", "--install", str(example_dir)]) == 0
    assert sorted(os.listdir(example_dir)) == before


def test_cli_examples_readonly_dir(tmp_path, capsys):
    target = tmp_path / "ro"
    target.mkdir()
    os.chmod(target, stat.S_IRUSR | stat.S_IXUSR)
    try:
        if hasattr(os, "geteuid") and os.geteuid() == 0:
            pytest.skip("root ignores directory modes")
        code = main(["examples", "--install", str(target)])
        assert code == 2
        assert "cannot install" in capsys.readouterr().err
    finally:
        os.chmod(target, stat.S_IRWXU)


def test_cli_missing_file(capsys):
    assert main(["check", "/nonexistent/x.sys"]) == 2
