import http.client
import json
import threading
from pathlib import Path

import pytest

from sparecast.cli import main
from sparecast.report import build_report, render_json
from sparecast.revision import SessionStore
from sparecast.service import EngineService, make_server

from helpers import make_document, make_mode, make_part

FIGURE1 = Path(__file__).parent / "fixtures" / "figure1.json"


class TestCliAnalyze:
    def test_figure1_exits_2_with_hotspot(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(["analyze", str(FIGURE1), "--format", "json", "--out", str(out)])
        assert code == 2
        report = json.loads(out.read_text())
        assert report["totals"]["hotspot_count"] == 1
        assert report["hotspots"][0]["node"] == "shaft-assy-vcf"

    def test_certain_document_exits_0(self, tmp_path, certain_doc, capsys):
        doc = tmp_path / "doc.json"
        doc.write_text(certain_doc)
        code = main(["analyze", str(doc)])
        assert code == 0
        assert "hotspot" not in capsys.readouterr().out.split("totals")[0]

    def test_missing_file_exits_1(self, capsys):
        assert main(["analyze", "/nonexistent/file.json"]) == 1
        assert "error" in capsys.readouterr().err

    def test_invalid_document_names_node(self, tmp_path, capsys):
        doc = tmp_path / "bad.json"
        doc.write_text(
            make_document(
                [make_part("root", "r", None), make_part("a", "a", "ghost")]
            )
        )
        assert main(["analyze", str(doc)]) == 1
        err = capsys.readouterr().err
        assert "ghost" in err and "a" in err

    def test_text_format_renders(self, tmp_path, capsys):
        code = main(["analyze", str(FIGURE1)])
        captured = capsys.readouterr().out
        assert code == 2
        assert "shaft-assy-vcf" in captured
        assert "hotspots (needs human):" in captured

    def test_show_config(self, capsys):
        assert main(["--show-config"]) == 0
        dump = json.loads(capsys.readouterr().out)
        assert "class_table" in dump and "cost_model" in dump


class TestCliResolve:
    def journal(self, tmp_path) -> Path:
        journal = tmp_path / "session.ndjson"
        code = main(
            ["analyze", str(FIGURE1), "--journal", str(journal), "--out", str(tmp_path / "r.txt")]
        )
        assert code == 2
        return journal

    def test_declare_certain_appends_record(self, tmp_path, capsys):
        journal = self.journal(tmp_path)
        before = journal.read_text().count("\n")
        code = main(
            [
                "resolve",
                "--journal",
                str(journal),
                "--hotspot",
                "H1",
                "--action",
                "declare-certain",
                "--mode",
                "shaft.m0",
                "--type",
                "wearout",
            ]
        )
        assert code == 0
        assert journal.read_text().count("\n") == before + 1
        record = json.loads(journal.read_text().splitlines()[-1])
        assert record["op"] == "resolve"
        assert record["action"] == "declare_certain"

    def test_replayed_session_reproduces_report(self, tmp_path, capsys):
        journal = self.journal(tmp_path)
        main(
            [
                "resolve",
                "--journal",
                str(journal),
                "--hotspot",
                "H1",
                "--action",
                "override",
                "--spared",
                "yes",
                "--stock",
                "branch=123",
            ]
        )
        text = journal.read_text()
        a, b = SessionStore(), SessionStore()
        sa = a.replay(text)
        sb = b.replay(text)
        ra = render_json(build_report(sa, a.detect_hotspots(sa.id)))
        rb = render_json(build_report(sb, b.detect_hotspots(sb.id)))
        assert ra == rb
        assert sa.result.plans["shaft-assy-vcf"].stocking[0][1] == 123

    def test_run_all_over_cap_exits_1(self, tmp_path, capsys):
        doc = tmp_path / "big.json"
        doc.write_text(
            make_document(
                [
                    make_part(
                        "unit",
                        "unit",
                        None,
                        cls="BEARING",
                        weight=300,
                        cost=2000,
                        modes=[
                            make_mode(f"m{i}", "uncertain", 0.4, 0.01, 0.02, 0.04)
                            for i in range(25)
                        ],
                    )
                ]
            )
        )
        journal = tmp_path / "big.ndjson"
        assert main(["analyze", str(doc), "--journal", str(journal), "--out", str(tmp_path / "x")]) == 2
        code = main(
            ["resolve", "--journal", str(journal), "--hotspot", "H1", "--action", "run-all"]
        )
        assert code == 1
        assert "cap" in capsys.readouterr().err.lower()

    def test_bad_action_combo_exits_1(self, tmp_path, capsys):
        journal = self.journal(tmp_path)
        assert main(["resolve", "--journal", str(journal), "--hotspot", "H1"]) == 1


@pytest.fixture
def service(figure1_text):
    store = SessionStore()
    session = store.create(figure1_text)
    return EngineService(store, session.id)


def get(service, path):
    status, payload, ctype = service.dispatch("GET", path, b"")
    return status, json.loads(payload) if ctype == "application/json" else payload


def post(service, path, body):
    status, payload, _ = service.dispatch("POST", path, json.dumps(body).encode())
    return status, json.loads(payload)


class TestService:
    def test_tree_matches_report(self, service):
        status, tree = get(service, "/api/tree?session=s1")
        assert status == 200
        status, report = get(service, "/api/report?session=s1")
        assert status == 200
        by_id = {n["id"]: n for n in report["nodes"]}
        for node in tree["nodes"]:
            entry = dict(node)
            entry.pop("children")
            assert entry == by_id[node["id"]]

    def test_hotspots_endpoint(self, service):
        status, payload = get(service, "/api/hotspots")
        assert status == 200
        assert payload["hotspots"][0]["node"] == "shaft-assy-vcf"

    def test_explain_endpoint(self, service):
        status, payload = get(service, "/api/nodes/spring-clip/explain")
        assert status == 200
        rules = {j["rule"] for j in payload["active"]}
        assert "below_inseparable_frontier" in rules

    def test_sensitivity_endpoint(self, service):
        status, payload = get(service, "/api/nodes/shaft-assy-vcf/sensitivity")
        assert status == 200
        assert payload["uncertain"] is True
        assert payload["decision_under_max"] == "high"
        assert payload["decision_under_min"] == "low"
        assert 0.15 < payload["p"] < 0.25

    def test_edit_bumps_version(self, service):
        status, payload = post(
            service,
            "/api/edits",
            {"node": "shaft-vcf", "field": "modes.shaft.m0.p_wearout", "old": 0.93, "new": 1.0},
        )
        assert status == 200
        assert payload["version"] == 1

    def test_stale_edit_409(self, service):
        status, payload = post(
            service,
            "/api/edits",
            {"node": "shaft-vcf", "field": "modes.shaft.m0.p_wearout", "old": 0.5, "new": 1.0},
        )
        assert status == 409
        assert payload["code"] == "stale_edit"

    def test_unknown_node_404(self, service):
        status, payload = get(service, "/api/nodes/ghost/explain")
        assert status == 404

    def test_resolve_endpoint(self, service):
        status, payload = post(
            service,
            "/api/hotspots/H1/resolve",
            {
                "action": "manual_override",
                "params": {"spared": True, "stocking": [["branch", 77]]},
            },
        )
        assert status == 200
        status, hotspots = get(service, "/api/hotspots")
        assert hotspots["hotspots"] == []

    def test_fork_endpoint(self, service):
        status, payload = post(service, "/api/sessions/s1/fork", {})
        assert status == 201
        assert payload["session"] == "s2"
        status, tree = get(service, f"/api/tree?session={payload['session']}")
        assert status == 200

    def test_idempotent_mutation_with_token(self, service):
        body = {
            "node": "shaft-vcf",
            "field": "modes.shaft.m0.p_wearout",
            "old": 0.93,
            "new": 1.0,
            "request_token": "tok-1",
        }
        status1, payload1 = post(service, "/api/edits", body)
        status2, payload2 = post(service, "/api/edits", body)
        assert (status1, payload1) == (status2, payload2)
        # without the token the second application is stale
        body.pop("request_token")
        status3, _ = post(service, "/api/edits", body)
        assert status3 == 409

    def test_static_fallback_page(self, service):
        status, payload, ctype = service.dispatch("GET", "/", b"")
        assert status == 200
        assert ctype == "text/html"

    def test_over_http_socket(self, figure1_text):
        store = SessionStore()
        session = store.create(figure1_text)
        server = make_server(EngineService(store, session.id), "127.0.0.1", 0)
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            conn = http.client.HTTPConnection("127.0.0.1", port, timeout=5)
            conn.request("GET", "/api/report")
            resp = conn.getresponse()
            assert resp.status == 200
            report = json.loads(resp.read())
            assert report["totals"]["hotspot_count"] == 1
            conn.request(
                "POST",
                "/api/edits",
                body=json.dumps(
                    {
                        "node": "gear-vcf",
                        "field": "modes.gear.m0.rate.best",
                        "old": 0.1,
                        "new": 0.12,
                    }
                ),
                headers={"Content-Type": "application/json"},
            )
            resp = conn.getresponse()
            assert resp.status == 200
            assert json.loads(resp.read())["version"] == 1
        finally:
            server.shutdown()
            server.server_close()
