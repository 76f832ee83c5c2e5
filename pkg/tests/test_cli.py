"""Command tree, output modes, exit codes, and exports over a live app."""

import json

import pytest
from helpers.service import make_service, run_walkthrough_campaign

from variantlab.cli import main
from variantlab.fixtures import load_walkthrough
from variantlab.pipeline.models import Location, Scenario, ScenarioState


@pytest.fixture(scope="module")
def service(tmp_path_factory):
    client, ctx = make_service(tmp_path_factory.mktemp("cli"))
    campaign_id = run_walkthrough_campaign(client, ctx)
    yield client, ctx, campaign_id
    ctx.store.close()


def run_cli(client, *argv):
    import io
    from contextlib import redirect_stderr, redirect_stdout

    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv), client=client)
    return code, out.getvalue(), err.getvalue()


class TestCorpusCommands:
    def test_ingest_human_and_json(self, tmp_path):
        client, ctx = make_service(tmp_path)
        export = tmp_path / "export.jsonl"
        export.write_text(load_walkthrough().seed_export)

        code, out, err = run_cli(client, "corpus", "ingest", str(export))
        assert code == 0
        assert "ingested 1 new, 0 updated" in out

        code, out, _ = run_cli(client, "--json", "corpus", "ingest", str(export))
        assert code == 0
        doc = json.loads(out)
        assert doc["inserted"] == 0
        assert doc["seeds"] == ["440048019"]
        ctx.store.close()

    def test_ingest_missing_file_fails(self, tmp_path):
        client, ctx = make_service(tmp_path)
        code, out, err = run_cli(client, "corpus", "ingest", str(tmp_path / "nope.jsonl"))
        assert code == 1
        assert "error:" in err
        ctx.store.close()

    def test_preanalyze_flag_validation(self, tmp_path):
        client, ctx = make_service(tmp_path)
        code, _, err = run_cli(client, "corpus", "preanalyze")
        assert code == 1
        assert "exactly one" in err
        code, _, err = run_cli(client, "corpus", "preanalyze", "--all", "--seed", "1")
        assert code == 1
        ctx.store.close()

    def test_preanalyze_single_seed(self, tmp_path):
        client, ctx = make_service(tmp_path)
        export = tmp_path / "export.jsonl"
        export.write_text(load_walkthrough().seed_export)
        run_cli(client, "corpus", "ingest", str(export))
        code, out, _ = run_cli(client, "corpus", "preanalyze", "--seed", "440048019")
        assert code == 0
        assert "preanalyzed 1 seed(s)" in out
        ctx.store.close()


class TestCampaignCommands:
    def test_create_start_status_round_trip(self, tmp_path):
        client, ctx = make_service(tmp_path)
        export = tmp_path / "export.jsonl"
        export.write_text(load_walkthrough().seed_export)
        run_cli(client, "corpus", "ingest", str(export))
        run_cli(client, "corpus", "preanalyze", "--all")

        config = tmp_path / "campaign.yaml"
        config.write_text(
            "target: engine-checkout\npipeline_shape: four\nscheduling: newest-first\n"
        )
        code, out, _ = run_cli(client, "campaign", "create", "--config", str(config))
        assert code == 0
        assert out.startswith("created cmp-")
        campaign_id = out.split()[1]

        # A previously paused campaign resumes through plain start.
        doc = ctx.store.get_campaign(campaign_id)
        doc["state"] = "paused"
        ctx.store.put_campaign(doc)
        code, out, _ = run_cli(client, "campaign", "start", campaign_id)
        assert code == 0
        assert f"{campaign_id}: running" in out

        ctx.supervisor.join(campaign_id, timeout=60.0)
        code, out, _ = run_cli(client, "campaign", "status", campaign_id)
        assert code == 0
        assert f"campaign {campaign_id}: completed" in out
        assert "seeds processed: 1" in out

        code, out, _ = run_cli(client, "--json", "campaign", "status", campaign_id)
        doc = json.loads(out)
        assert doc["state"] == "completed"
        assert doc["totals"]["seeds_processed"] == 1
        ctx.store.close()

    def test_bad_config_file(self, tmp_path):
        client, ctx = make_service(tmp_path)
        config = tmp_path / "bad.yaml"
        config.write_text("- just\n- a\n- list\n")
        code, _, err = run_cli(client, "campaign", "create", "--config", str(config))
        assert code == 1
        assert "mapping" in err
        ctx.store.close()

    def test_status_unknown_campaign(self, tmp_path):
        client, ctx = make_service(tmp_path)
        code, _, err = run_cli(client, "campaign", "status", "cmp-missing")
        assert code == 1
        assert "404" in err
        ctx.store.close()

    def test_usage_errors_exit_two(self, tmp_path):
        client, ctx = make_service(tmp_path)
        with pytest.raises(SystemExit) as exc:
            run_cli(client, "campaign")
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            run_cli(client, "reports", "export", "--campaign", "x", "--format", "pdf")
        assert exc.value.code == 2
        ctx.store.close()

    def test_unreachable_service(self):
        code, _, err = run_cli(None, "--api", "http://127.0.0.1:9", "campaign", "status", "x")
        assert code == 1
        assert "unreachable" in err


class TestScenarioAndReportCommands:
    def test_scenarios_list(self, service):
        client, ctx, campaign_id = service
        code, out, _ = run_cli(client, "scenarios", "list", "--campaign", campaign_id)
        assert code == 0
        assert "440048019/scn-1" in out
        assert "[validated]" in out
        assert "operations.h" in out

        code, out, _ = run_cli(
            client, "scenarios", "list", "--campaign", campaign_id, "--state", "refuted"
        )
        assert code == 0
        assert out.strip() == "no scenarios"

        code, out, _ = run_cli(client, "--json", "scenarios", "list", "--campaign", campaign_id)
        docs = json.loads(out)
        assert [d["state"] for d in docs] == ["validated"]

    def test_reports_export_structured(self, service):
        client, ctx, campaign_id = service
        code, out, _ = run_cli(client, "reports", "export", "--campaign", campaign_id)
        assert code == 0
        docs = json.loads(out)
        assert len(docs) == 1
        assert docs[0]["id"] == "440048019/scn-1/report"
        assert docs[0]["release_output"] == "7\n"

    def test_reports_export_markdown(self, service):
        client, ctx, campaign_id = service
        code, out, _ = run_cli(
            client, "reports", "export", "--campaign", campaign_id, "--format", "markdown"
        )
        assert code == 0
        assert out.startswith("# ")
        assert "## Summary" in out
        assert "## Trigger conditions" in out
        assert "## Reproduction" in out
        assert "Release build output:" in out
        assert "Debug build output:" in out
        assert "7" in out
        assert "Debug check failed" in out


class TestMetricsCommand:
    def test_pass_rate_printed_from_fixture(self, tmp_path):
        client, ctx = make_service(tmp_path)
        created = client.post("/campaigns", json={"target": "t"})
        campaign_id = created.json()["id"]
        # Nine approved, one rejected: the gate decided ten scenarios.
        for n in range(10):
            state = ScenarioState.REJECTED_REDUNDANT if n == 9 else ScenarioState.APPROVED
            ctx.store.upsert_scenario(
                campaign_id,
                Scenario(
                    id=f"778/scn-{n}",
                    seed_id="778",
                    locations=(Location(file="a.cc", line_start=1, line_end=2),),
                    hypothesis=f"variant {n}",
                    state=state,
                ),
            )
        code, out, _ = run_cli(client, "metrics", "show", campaign_id)
        assert code == 0
        assert "coverage pass rate: 0.90" in out

        code, out, _ = run_cli(client, "--json", "metrics", "show", campaign_id)
        assert json.loads(out)["coverage_pass_rate"] == 0.9
        ctx.store.close()


class TestExecCommand:
    def test_poke_release_and_debug(self, tmp_path):
        client, ctx = make_service(tmp_path)
        poc = tmp_path / "poc.js"
        poc.write_text(load_walkthrough().poc)

        code, out, _ = run_cli(client, "exec", "poke", "--poc", str(poc))
        assert code == 0
        assert "exit: ok" in out
        assert "stdout:\n7" in out

        code, out, _ = run_cli(client, "exec", "poke", "--poc", str(poc), "--build", "debug")
        assert code == 0
        assert "evidence: debug_assertion" in out
        assert "assertion: DCHECK" in out

        code, out, _ = run_cli(client, "--json", "exec", "poke", "--poc", str(poc))
        assert json.loads(out)["stdout"] == "7\n"
        ctx.store.close()
