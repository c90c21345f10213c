import json
import os

import pytest

from coldplasma.cli.main import execute, main
from coldplasma.cli.scenario import config_hash, parse_scenario, serialize
from coldplasma.errors import ParseError, ValidationError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def doc(**over):
    d = {"mode": "simulate",
         "geometry": {"kind": "slab", "length": 1.0, "n": 16},
         "medium": {"species": [{"omega_p": 1.0, "nu": 0.5}], "B_ext": [0.3, 0.2, 1.0]},
         "time": {"T": 0.5}}
    d.update(over)
    return d


def parse(d):
    return parse_scenario(json.dumps(d))


def test_defaults_applied():
    s = parse(doc())
    assert s.doc["constants"] == {"eps0": 1.0, "c": 1.0}
    assert s.doc["time"]["cfl_fraction"] == 0.9
    assert s.doc["track_rho"] is False
    assert s.doc["boundary"]["default"] == "PEC"
    assert s.dt() == pytest.approx(0.9 / 16)


def test_unknown_key_reports_pointer():
    d = doc()
    d["medium"]["species"][0]["mass"] = 3
    with pytest.raises(ParseError) as ei:
        parse(d)
    assert ei.value.pointer == "/medium/species/0"
    with pytest.raises(ParseError):
        parse_scenario("{not json")


def test_undamped_decay_study_rejected():
    d = doc(mode="decay-study")
    d["medium"]["species"][0]["nu"] = 0.0
    with pytest.raises(ValidationError) as ei:
        parse(d)
    assert "bounded below by a strictly positive constant" in str(ei.value)
    assert ei.value.pointer == "/medium/species/0/nu"


def test_dt_above_cfl_rejected():
    with pytest.raises(ValidationError) as ei:
        parse(doc(time={"T": 1.0, "dt": 0.1}))
    assert ei.value.pointer == "/time/dt"
    parse(doc(time={"T": 1.0, "dt": 0.05}))


def test_semantic_checks():
    with pytest.raises(ValidationError):
        parse(doc(boundary={"faces": {"y-": "PEC"}}))
    with pytest.raises(ValidationError):
        parse(doc(boundary={"forcing": {"kind": "harmonic", "omega": 1.0, "profile": {"vector": [0, 1, 0]}}}))
    with pytest.raises(ValidationError):
        parse(doc(initial={"kind": "cavity"}))


def test_harmonic_forcing_wired_to_boundary():
    s = parse(doc(mode="harmonic", initial={"kind": "harmonic"},
                  boundary={"default": "SilverMuller",
                            "forcing": {"kind": "harmonic", "omega": 2.5, "profile": {"vector": [0, 1, 0]}}}))
    bc = s.boundary()
    assert bc.forcing.kind == "harmonic" and bc.forcing.omega == 2.5
    assert set(bc.absorbing_faces(s.grid())) == {"x-", "x+"}


@pytest.mark.parametrize("name", sorted(os.listdir(os.path.join(ROOT, "scenarios"))))
def test_round_trip(name):
    with open(os.path.join(ROOT, "scenarios", name)) as fh:
        s = parse_scenario(fh.read())
    t = parse_scenario(serialize(s))
    assert t == s and config_hash(t) == config_hash(s)


def _csv_bytes(out):
    with open(os.path.join(out, "diagnostics.csv"), "rb") as fh:
        return fh.read()


def test_execute_is_deterministic(tmp_path):
    s = parse(doc(initial={"kind": "random"}, seed=11, track_rho=True))
    m = execute(s, str(tmp_path / "a"))
    execute(s, str(tmp_path / "b"))
    assert _csv_bytes(tmp_path / "a") == _csv_bytes(tmp_path / "b")
    assert "diagnostics.csv" in m["artifacts"] and m["seed"] == 11
    # rerunning from the manifest reproduces the artifact
    rc = main(["simulate", "--scenario", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "c")])
    assert rc == 0
    assert _csv_bytes(tmp_path / "a") == _csv_bytes(tmp_path / "c")
    other = execute(s.with_seed(12), str(tmp_path / "d"))
    assert other["config_sha256"] != m["config_sha256"]
    assert _csv_bytes(tmp_path / "a") != _csv_bytes(tmp_path / "d")


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc(extra=1)))
    assert main(["validate", "--scenario", str(bad)]) == 2
    d = doc(mode="decay-study")
    d["medium"]["species"][0]["nu"] = 0
    bad.write_text(json.dumps(d))
    assert main(["validate", "--scenario", str(bad)]) == 3
    good = tmp_path / "good.json"
    good.write_text(json.dumps(doc()))
    assert main(["validate", "--scenario", str(good)]) == 0
    assert main(["probe", "--scenario", str(good), "--out", str(tmp_path / "o")]) == 3
    assert main(["validate", "--scenario", str(tmp_path / "missing.json")]) == 4
    err = capsys.readouterr().err
    assert "ValidationError" in err and "ParseError" in err


def test_fit_verb(tmp_path, capsys):
    d = doc(mode="decay-study", initial={"kind": "smooth_slab"}, time={"T": 4.0})
    execute(parse(d), str(tmp_path / "run"))
    capsys.readouterr()
    rc = main(["fit", "--csv", str(tmp_path / "run" / "diagnostics.csv"), "--model", "exp",
               "--window", "0.5", "4", "--out", str(tmp_path / "fit")])
    assert rc == 0
    res = json.loads(capsys.readouterr().out)
    assert res["column"] == "E_total" and res["rate"] < 0
    assert (tmp_path / "fit" / "fit.json").exists()


def test_probe_and_harmonic_verbs(tmp_path):
    p = doc(mode="probe", probe={"beta_min": 1.0, "beta_max": 10.0, "n_betas": 20, "quasimodes": 2})
    p["time"] = {}
    m = execute(parse(p), str(tmp_path / "p"))
    assert "resolvent.csv" in m["artifacts"]
    summ = json.load(open(tmp_path / "p" / "probe_summary.json"))
    assert summ["kernel_dim"] == 2 and len(summ["quasimodes"]) == 2
    h = doc(mode="harmonic", initial={"kind": "harmonic", "perturbation": 1.0}, time={"T": 2.0},
            boundary={"default": "SilverMuller",
                      "forcing": {"kind": "harmonic", "omega": 2.0, "profile": {"vector": [0, 1, 0]}}})
    m = execute(parse(h), str(tmp_path / "h"))
    assert "harmonic_error.csv" in m["artifacts"]
