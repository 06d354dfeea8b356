import json
import subprocess
import sys

import pytest

from casimir_spheres import cli
from casimir_spheres import spectral as sp
from casimir_spheres import round_trip as rt

BASE = {
    "r_A": "1", "r_B": "2", "mode": "interior", "field": "scalar",
    "cond_A": "dirichlet", "cond_B": "dirichlet", "d": "0.05", "T": "0",
    "routes": "pfa,asym",
}


def cfg(**over):
    raw = dict(BASE)
    raw.update({k: str(v) for k, v in over.items()})
    return cli.build_config(raw)


class TestConfig:
    def test_basic(self):
        c = cfg()
        assert c.d_values == [0.05]
        assert c.routes == ["pfa", "asym"]
        assert c.pair.label() == "DD"

    def test_L_instead_of_d(self):
        raw = dict(BASE)
        del raw["d"]
        raw["L"] = "0.9"
        c = cli.build_config(raw)
        assert c.d_values[0] == pytest.approx(0.1)

    def test_exactly_one_of_d_or_L(self):
        raw = dict(BASE)
        raw["L"] = "0.9"
        with pytest.raises(cli.ConfigError):
            cli.build_config(raw)

    def test_routes_required(self):
        with pytest.raises(cli.ConfigError):
            cfg(routes="")

    def test_unknown_route(self):
        with pytest.raises(cli.ConfigError):
            cfg(routes="exact,magic")

    def test_robin_needs_alpha(self):
        with pytest.raises(cli.ConfigError):
            cfg(cond_A="robin")
        c = cfg(cond_A="robin", alpha_A="0.7")
        assert c.cond_A.alpha == 0.7

    def test_alpha_without_robin_rejected(self):
        with pytest.raises(cli.ConfigError):
            cfg(alpha_A="0.7")

    def test_em_conditions(self):
        c = cfg(field="em", cond_A="pec", cond_B="permeable")
        assert c.pair.label() == "CP"
        with pytest.raises(cli.ConfigError):
            cfg(field="em", cond_A="dirichlet", cond_B="pec")

    def test_unphysical_gap(self):
        with pytest.raises(cli.ConfigError):
            cfg(d="1.5")
        with pytest.raises(cli.ConfigError):
            cfg(d_values="0.1,-0.2")

    def test_log_range(self):
        raw = dict(BASE)
        del raw["d"]
        raw["d_range"] = "0.01:0.1:3"
        c = cli.build_config(raw)
        assert len(c.d_values) == 3
        assert c.d_values[0] == pytest.approx(0.01)
        assert c.d_values[2] == pytest.approx(0.1)

    def test_config_file_parsing(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("r_A = 1  # small sphere\nr_B=2\ncond_A=D\ncond_B=D\n"
                     "d=0.05\nroutes=asym\n")
        raw = cli.parse_config_file(str(p))
        c = cli.build_config(raw)
        assert c.d_values == [0.05]


class TestRun:
    def test_csv_header_exact(self):
        code, rows = cli.run(cfg(routes="asym"))
        text = cli.encode_csv(rows)
        assert text.splitlines()[0] == cli.CSV_HEADER
        assert code == 0

    def test_compare_columns_and_value_identity(self):
        code, rows = cli.run(cfg())
        csv_text = cli.encode_csv(rows)
        assert csv_text.splitlines()[0] == cli.CSV_HEADER + ",dev_asym_pfa"
        doc = json.loads(cli.encode_json(rows))
        # CSV and JSON encode identical numeric values (repr round-trip)
        for line, row in zip(csv_text.splitlines()[1:], doc["rows"]):
            assert repr(row["value"]) in line
        assert "units" in doc

    def test_reruns_are_byte_identical(self):
        c1 = cfg(deterministic="true")
        c2 = cfg(deterministic="true")
        _, rows1 = cli.run(c1)
        _, rows2 = cli.run(c2)
        assert cli.encode_csv(rows1) == cli.encode_csv(rows2)

    def test_exact_route_smoke(self):
        c = cfg(routes="exact", d="0.5", rel_tol="1e-3", quad_points_initial="6")
        code, rows = cli.run(c)
        assert code == 0
        assert rows[0]["l_max"] >= 8
        assert rows[0]["value"] < 0

    def test_exit_three_on_nonconvergence(self):
        c = cfg(routes="exact", d="0.5", rel_tol="1e-12",
                l_max_initial="8", l_max_cap="10")
        code, rows = cli.run(c)
        assert code == cli.EXIT_NOT_CONVERGED
        assert rows[0]["value"] is not None   # best estimate still emitted

    def test_allow_partial(self):
        c = cfg(routes="exact", d="0.5", rel_tol="1e-12",
                l_max_initial="8", l_max_cap="10", allow_partial="true")
        code, rows = cli.run(c)
        assert code == 0

    def test_sweep_rows_in_input_order(self):
        raw = dict(BASE)
        del raw["d"]
        raw.update(routes="asym", d_values="0.05,0.03,0.04", T="0,1")
        c = cli.build_config(raw)
        _, rows = cli.run(c)
        seq = [(r["d"], r["T"]) for r in rows]
        assert seq == [(0.05, 0.0), (0.05, 1.0), (0.03, 0.0), (0.03, 1.0),
                       (0.04, 0.0), (0.04, 1.0)]

    def test_route_deviations_shrink_with_gap(self):
        raw = dict(BASE)
        del raw["d"]
        raw.update(routes="pfa,asym", d_values="0.1,0.05,0.02")
        _, rows = cli.run(cli.build_config(raw))
        devs = [r["dev_asym_pfa"] for r in rows if r["route"] == "pfa"]
        assert devs[0] > devs[1] > devs[2] > 0

    def test_threads_default_from_environment(self, monkeypatch):
        monkeypatch.setenv("CASIMIR_THREADS", "3")
        assert cfg().threads == 3

    def test_worker_pool_preserves_input_order(self):
        raw = dict(BASE)
        del raw["d"]
        raw.update(routes="asym", d_values="0.05,0.02,0.03", threads="2")
        _, rows = cli.run(cli.build_config(raw))
        assert [r["d"] for r in rows] == [0.05, 0.02, 0.03]

    def test_force_observable(self):
        c = cfg(routes="asym", observable="force")
        _, rows = cli.run(c)
        assert rows[0]["kind"] == "force"
        assert rows[0]["value"] < 0

    def test_pfa_force_route(self):
        c = cfg(routes="pfa,asym", observable="force", d="0.04")
        _, rows = cli.run(c)
        vals = {r["route"]: r["value"] for r in rows}
        assert vals["pfa"] < 0 and vals["asym"] < 0
        assert abs(vals["pfa"] / vals["asym"] - 1) < 0.25

    def test_asym_force_finite_T_rejected(self):
        c = cfg(routes="asym", observable="force", T="0.5")
        with pytest.raises(cli.ConfigError):
            cli.run(c)


class TestMain:
    def test_validation_exit_code(self, capsys):
        code = cli.main(["compute", "--set", "r_A=1"])
        assert code == cli.EXIT_VALIDATION
        assert "config error" in capsys.readouterr().err

    def test_compare_needs_two_routes(self):
        args = ["compare", "--route", "asym"]
        for k, v in BASE.items():
            if k != "routes":
                args += ["--set", f"{k}={v}"]
        assert cli.main(args) == cli.EXIT_VALIDATION

    def test_compute_single_point_only(self):
        args = ["compute", "--route", "asym"]
        for k, v in BASE.items():
            if k not in ("routes", "d"):
                args += ["--set", f"{k}={v}"]
        args += ["--set", "d_values=0.01,0.02"]
        assert cli.main(args) == cli.EXIT_VALIDATION

    def test_csv_output_file(self, tmp_path):
        out = tmp_path / "res.csv"
        args = ["sweep", "--route", "asym", "--format", "csv", "--out", str(out)]
        for k, v in BASE.items():
            if k != "routes":
                args += ["--set", f"{k}={v}"]
        assert cli.main(args) == 0
        assert out.read_text().splitlines()[0] == cli.CSV_HEADER

    def test_module_entry_point(self):
        cmd = [sys.executable, "-m", "casimir_spheres", "compute",
               "--route", "asym", "--format", "csv"]
        for k, v in BASE.items():
            if k != "routes":
                cmd += ["--set", f"{k}={v}"]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[0] == cli.CSV_HEADER


class TestConvergenceReport:
    def test_report_contents_and_stability(self):
        raw = dict(BASE)
        raw.update(routes="exact", d="0.45", rel_tol="1e-3",
                   quad_points_initial="6")
        c = cli.build_config(raw)
        rep1 = cli.convergence_report(c)
        rep2 = cli.convergence_report(cli.build_config(raw))
        assert rep1 == rep2                       # byte-stable
        assert "l_max escalation" in rep1
        assert "quadrature refinement" in rep1
        # monotone stabilization: parse the |rel change| column
        changes = []
        for line in rep1.splitlines():
            parts = line.split()
            if len(parts) >= 3 and parts[0].isdigit() and "e" in parts[2]:
                changes.append(float(parts[2]))
        assert len(changes) >= 2
        assert changes[-1] < changes[0]

    def test_requires_exact_route(self):
        with pytest.raises(cli.ConfigError):
            cli.convergence_report(cfg(routes="asym"))

    def test_matsubara_section(self):
        raw = dict(BASE)
        raw.update(routes="exact", d="0.45", T="2.0", rel_tol="1e-3")
        rep = cli.convergence_report(cli.build_config(raw))
        assert "Matsubara tail" in rep

    def test_em_report_mentions_fit_reference(self):
        raw = dict(BASE)
        raw.update(routes="exact", field="em", cond_A="pec", cond_B="pec",
                   d="0.45", rel_tol="1e-3")
        rep = cli.convergence_report(cli.build_config(raw))
        assert "reference numeric fit" in rep
        assert "k2=1.6931" in rep

    def test_halving_gap_roughly_doubles_l_max(self):
        spec = sp.ConvergenceSpec(rel_tol=1e-3, quad_points_initial=6)
        dd = rt.scalar_pair(rt.DIRICHLET, rt.DIRICHLET)
        l_coarse = sp.energy_T0(rt.Geometry.interior(1.0, 2.0, d=0.4), dd, spec).l_max_used
        l_fine = sp.energy_T0(rt.Geometry.interior(1.0, 2.0, d=0.2), dd, spec).l_max_used
        assert 1.4 <= l_fine / l_coarse <= 3.0
