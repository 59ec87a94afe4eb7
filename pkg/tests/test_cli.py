import hashlib
import json
import math

import numpy as np
import pytest

from ergo.exceptions import (
    ChainValidationError,
    DimensionMismatch,
    ModelValidationError,
    NegativeEntry,
    ParseError,
    UnknownReference,
)
from ergo.commands import ldp as ldp_command
from ergo.main import build_parser, main
from ergo.schemas import emit_model, load_model, parse_model

P2_MODEL = {
    "states": ["a", "b"],
    "matrix": [[0.9, 0.1], [0.2, 0.8]],
    "observables": {"f": [1.0, -2.0], "g": [0.0, 1.0]},
    "potentials": {"c": [math.log(2.0), math.log(2.0)], "gain": [-0.1, -0.1]},
    "boundaries": {"right": ["b"]},
    "initial_laws": {"left": [1.0, 0.0]},
}


def _write(path, payload) -> str:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


@pytest.fixture
def p2_file(tmp_path) -> str:
    return _write(tmp_path / "p2.json", P2_MODEL)


@pytest.fixture
def swap_file(tmp_path) -> str:
    return _write(
        tmp_path / "swap.json",
        {"states": ["x", "y"], "matrix": [[0.0, 1.0], [1.0, 0.0]], "observables": {"f": [1.0, -1.0]}},
    )


def _run(argv, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    report = json.loads(out.read_text(encoding="utf-8")) if out.exists() else None
    return code, report


class TestModelFile:
    def test_load(self):
        model = load_model(json.dumps(P2_MODEL))
        assert model.chain.size == 2
        np.testing.assert_array_equal(model.observable("f"), [1.0, -2.0])
        assert model.boundary("right") == (1,)
        assert model.state("b") == 1

    def test_round_trip(self):
        model = load_model(json.dumps(P2_MODEL))
        assert load_model(emit_model(model)).model_dump() == model.model_dump()

    def test_parse_error_has_line(self):
        with pytest.raises(ParseError) as info:
            load_model('{\n  "states": ["a"],\n  "matrix": [[1.0]\n}')
        assert info.value.line == 4

    def test_top_level_must_be_object(self):
        with pytest.raises(ParseError):
            load_model("[1, 2]")

    def test_missing_matrix(self):
        with pytest.raises(ModelValidationError):
            load_model(json.dumps({"states": ["a"]}))

    def test_unknown_key(self):
        with pytest.raises(ModelValidationError):
            load_model(json.dumps({**P2_MODEL, "extra": 1}))

    def test_negative_entry(self):
        with pytest.raises(NegativeEntry):
            load_model(json.dumps({**P2_MODEL, "matrix": [[1.1, -0.1], [0.2, 0.8]]}))

    def test_unknown_boundary_state(self):
        with pytest.raises(UnknownReference):
            load_model(json.dumps({**P2_MODEL, "boundaries": {"edge": ["z"]}}))

    def test_observable_length(self):
        with pytest.raises(DimensionMismatch):
            load_model(json.dumps({**P2_MODEL, "observables": {"f": [1.0]}}))

    def test_initial_law_must_be_distribution(self):
        with pytest.raises(ChainValidationError):
            load_model(json.dumps({**P2_MODEL, "initial_laws": {"bad": [0.5, 0.4]}}))

    def test_unknown_names(self):
        model = load_model(json.dumps(P2_MODEL))
        for lookup in (model.observable, model.potential, model.initial_law, model.boundary, model.state):
            with pytest.raises(UnknownReference):
                lookup("missing")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            parse_model(tmp_path / "absent.json")


class TestParser:
    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["analyze"])
        assert info.value.code == 2

    def test_exclusive_coupling_kinds(self, p2_file):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["couple", p2_file, "--from", "a", "--to", "b", "--simple", "--vaserstein"])

    def test_common_options(self, p2_file):
        args = build_parser().parse_args(["analyze", p2_file, "--format", "text", "--csv", "x.csv"])
        assert args.format == "text"
        assert args.csv == "x.csv"
        assert args.n_max == 50


class TestAnalyze:
    def test_p2_report(self, p2_file, tmp_path):
        code, report = _run(["analyze", p2_file, "--n-max", "30"], tmp_path)
        assert code == 0
        results = report["results"]
        assert results["kappa"] == pytest.approx(0.3)
        assert results["kappa0"] == pytest.approx(0.1)
        assert results["mu_by_state"]["a"] == pytest.approx(2 / 3, abs=1e-12)
        assert results["worst_tv"][1] == pytest.approx(14 / 15)
        assert results["bound_holds"] is True
        assert results["r_v"] == pytest.approx(0.7, abs=1e-9)
        assert results["primitive_index"] == 1
        assert report["command"] == {"name": "analyze", "model": "p2.json", "cesaro_start": None, "n0": 1, "n_max": 30}
        assert report["input_digest"] == hashlib.sha256(open(p2_file, "rb").read()).hexdigest()
        assert report["seed"] is None

    def test_swap_warnings(self, swap_file, tmp_path):
        code, report = _run(["analyze", swap_file, "--n-max", "5"], tmp_path)
        assert code == 0
        assert any(w.startswith("NonUniqueWarning") for w in report["diagnostics"]["warnings"])
        assert report["results"]["primitive_index"] is None

    def test_csv(self, p2_file, tmp_path):
        csv_path = tmp_path / "curves.csv"
        assert main(["analyze", p2_file, "--n-max", "10", "--csv", str(csv_path), "--out", str(tmp_path / "r.json")]) == 0
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "n,worst_tv,bound_kappa,bound_rv"
        assert len(lines) == 12
        assert lines[1].startswith("0,")

    def test_text_format(self, p2_file, capsys):
        assert main(["analyze", p2_file, "--n-max", "5", "--format", "text"]) == 0
        out = capsys.readouterr().out
        assert "command.name: analyze" in out.splitlines()
        assert any(line.startswith("results.kappa: 0.") for line in out.splitlines())

    def test_stdout_json(self, p2_file, capsys):
        assert main(["analyze", p2_file, "--n-max", "5"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report) == {"command", "input_digest", "results", "diagnostics", "seed"}


class TestOtherCommands:
    def test_simple_coupling(self, p2_file, tmp_path):
        code, report = _run(["couple", p2_file, "--from", "a", "--to", "b", "--simple", "--n-max", "3"], tmp_path)
        assert code == 0
        assert report["results"]["tail"][1] == pytest.approx(0.74, abs=1e-12)
        assert report["results"]["bound_holds"] is True

    def test_simple_coupling_same_state(self, p2_file, tmp_path):
        code, _ = _run(["couple", p2_file, "--from", "a", "--to", "a", "--simple"], tmp_path)
        assert code == ModelValidationError.exit_code

    def test_vaserstein_exact(self, p2_file, tmp_path):
        code, report = _run(
            ["couple", p2_file, "--from", "left", "--to", "b", "--n-max", "5", "--paths", "0"], tmp_path
        )
        assert code == 0
        np.testing.assert_allclose(report["results"]["exact_bound"], 0.7 ** np.arange(6), atol=1e-12)

    def test_poisson_whole(self, p2_file, tmp_path):
        code, report = _run(["poisson", p2_file, "--observable", "f", "--whole"], tmp_path)
        assert code == 0
        results = report["results"]
        np.testing.assert_allclose(results["values"], [10 / 3, -20 / 3], atol=1e-10)
        assert results["residual"] <= 1e-10
        assert results["dynkin_defect"] <= 1e-10
        assert results["problem"] == "whole"

    def test_poisson_whole_potential(self, p2_file, tmp_path):
        code, report = _run(["poisson", p2_file, "--observable", "f", "--potential", "c"], tmp_path)
        assert code == 0
        np.testing.assert_allclose(report["results"]["values"], np.array([1.0, -2.0]) / 0.65, atol=1e-10)
        assert report["diagnostics"]["wellposedness"]["sign_condition"] is True

    def test_poisson_dirichlet(self, p2_file, tmp_path):
        code, report = _run(
            ["poisson", p2_file, "--observable", "f", "--boundary", "right", "--boundary-data", "g"], tmp_path
        )
        assert code == 0
        # u(a) = 1 + 0.9u(a) + 0.1·1
        np.testing.assert_allclose(report["results"]["values"], [11.0, 1.0], atol=1e-10)

    def test_poisson_ill_posed(self, p2_file, tmp_path):
        code, report = _run(["poisson", p2_file, "--observable", "f", "--potential", "gain"], tmp_path)
        assert code == 28
        assert report is None

    def test_boundary_data_needs_boundary(self, p2_file, tmp_path):
        code, _ = _run(["poisson", p2_file, "--observable", "f", "--boundary-data", "g"], tmp_path)
        assert code == ModelValidationError.exit_code

    def test_unknown_observable(self, p2_file, tmp_path):
        code, _ = _run(["poisson", p2_file, "--observable", "nope"], tmp_path)
        assert code == UnknownReference.exit_code

    def test_limits_mean(self, p2_file, tmp_path):
        code, report = _run(
            ["limits", p2_file, "--observable", "f", "--mode", "mean", "--n", "100", "--replicas", "400",
             "--seed", "7", "--epsilon", "0.5", "--init", "a"],
            tmp_path,
        )
        assert code == 0
        assert report["results"]["sigma2"] == pytest.approx(34 / 3, abs=1e-9)
        assert report["seed"] == {"master_seed": 7, "block_size": 256, "bit_generator": "Philox"}
        experiment = report["results"]["experiment"]
        assert experiment["exceedance"] <= experiment["chebyshev_bound"]

    def test_limits_clt_on_periodic_chain(self, swap_file, tmp_path):
        code, _ = _run(["limits", swap_file, "--observable", "f", "--n", "10", "--replicas", "10"], tmp_path)
        assert code == 22

    def test_ldp(self, p2_file, tmp_path):
        code, report = _run(
            ["ldp", p2_file, "--observable", "f", "--grid", "41", "--alpha-points", "7",
             "--epsilon", "0.3", "--n", "50"],
            tmp_path,
        )
        assert code == 0
        results = report["results"]
        assert abs(results["H_at_zero"]) <= 1e-12
        assert results["H_second_at_zero"] == pytest.approx(34 / 3, abs=1e-3)

    def test_ldp_grid_flags_reach_legendre(self, p2_file, tmp_path, monkeypatch):
        seen = []
        original_pair = ldp_command.legendre_pair
        original_tail = ldp_command.ld_tail_exact

        def _pair(*args, **kwargs):
            seen.append(kwargs)
            return original_pair(*args, **kwargs)

        def _tail(*args, **kwargs):
            seen.append(kwargs)
            return original_tail(*args, **kwargs)

        monkeypatch.setattr(ldp_command, "legendre_pair", _pair)
        monkeypatch.setattr(ldp_command, "ld_tail_exact", _tail)
        code, _ = _run(
            ["ldp", p2_file, "--observable", "f", "--beta-min", "-0.5", "--beta-max", "0.5",
             "--grid", "11", "--epsilon", "0.3", "--n", "20"],
            tmp_path,
        )
        assert code == 0
        assert len(seen) == 2
        for kwargs in seen:
            assert (kwargs["beta_min"], kwargs["beta_max"], kwargs["grid_points"]) == (-0.5, 0.5, 11)

    def test_ldp_epsilon_below_range(self, p2_file, tmp_path):
        code, report = _run(
            ["ldp", p2_file, "--observable", "f", "--grid", "41", "--epsilon", "-2.5", "--n", "10"],
            tmp_path,
        )
        assert code == 0
        results = report["results"]
        assert results["tail"]["probability"] == pytest.approx(1.0)
        assert results["L"] is None
        assert results["verdict"] is True

    def test_ldp_needs_epsilon_and_n(self, p2_file, tmp_path):
        code, _ = _run(["ldp", p2_file, "--observable", "f", "--epsilon", "0.3"], tmp_path)
        assert code == ModelValidationError.exit_code

    def test_missing_model(self, tmp_path):
        code, _ = _run(["analyze", str(tmp_path / "absent.json")], tmp_path)
        assert code == ParseError.exit_code

    def test_bad_row_sum(self, tmp_path):
        path = _write(tmp_path / "bad.json", {"states": ["a", "b"], "matrix": [[0.6, 0.5], [0.5, 0.5]]})
        code, _ = _run(["analyze", path], tmp_path)
        assert code == 13


class TestReproducibility:
    def test_seeded_reports_are_identical(self, p2_file, tmp_path):
        argv = ["limits", p2_file, "--observable", "f", "--mode", "mean", "--n", "60", "--replicas", "300", "--seed", "11"]
        assert main([*argv, "--out", str(tmp_path / "one.json")]) == 0
        assert main([*argv, "--out", str(tmp_path / "two.json")]) == 0
        assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()

    def test_mc_poisson_is_reproducible(self, p2_file, tmp_path):
        argv = ["poisson", p2_file, "--observable", "f", "--boundary", "right", "--method", "mc",
                "--paths", "500", "--seed", "3"]
        assert main([*argv, "--out", str(tmp_path / "one.json")]) == 0
        assert main([*argv, "--out", str(tmp_path / "two.json")]) == 0
        assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()
