"""Operator command line over the service API.

Every command is a thin HTTP client: no direct store access, so the
CLI, the dashboard, and anything else watching the API see the same
state. Read commands all take --json for machine-readable output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Callable

import httpx
import yaml

DEFAULT_API = "http://127.0.0.1:8321"


class CliError(Exception):
    """Operation failed; message is the diagnostic, exit code is 1."""


def _request(client: httpx.Client, method: str, path: str, **kwargs) -> Any:
    try:
        response = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        raise CliError(f"service unreachable: {exc}")
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise CliError(f"{method} {path} failed ({response.status_code}): {detail}")
    if response.headers.get("content-type", "").startswith("application/json"):
        return response.json()
    return response.text


def _emit(args, payload: Any, human: Callable[[Any], str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(human(payload))


# -- corpus -----------------------------------------------------------------


def cmd_corpus_ingest(args, client) -> int:
    text = Path(args.export_file).read_text(encoding="utf-8")
    result = _request(client, "POST", "/corpus/ingest", json={"export": text})

    def human(doc):
        line = f"ingested {doc['inserted']} new, {doc['updated']} updated"
        if doc["rejections"]:
            line += f", {len(doc['rejections'])} rejected"
            for r in doc["rejections"]:
                line += f"\n  line {r['line_number']}: {r['reason']}"
        return line

    _emit(args, result, human)
    return 0


def cmd_corpus_preanalyze(args, client) -> int:
    if args.all == (args.seed is not None):
        raise CliError("pass exactly one of --all or --seed ID")
    body = {"all": True} if args.all else {"seed_id": args.seed}
    result = _request(client, "POST", "/corpus/preanalyze", json=body)
    _emit(args, result, lambda doc: f"preanalyzed {len(doc['preanalyzed'])} seed(s)")
    return 0


# -- campaign lifecycle --------------------------------------------------------


def cmd_campaign_create(args, client) -> int:
    config = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
    if not isinstance(config, dict):
        raise CliError("campaign config file must hold a mapping")
    result = _request(client, "POST", "/campaigns", json=config)
    _emit(args, result, lambda doc: f"created {doc['id']} (state {doc['state']})")
    return 0


def _lifecycle(args, client, action: str) -> int:
    result = _request(client, "POST", f"/campaigns/{args.campaign_id}/{action}")
    _emit(args, result, lambda doc: f"{doc['id']}: {doc['state']}")
    return 0


def cmd_campaign_start(args, client) -> int:
    return _lifecycle(args, client, "start")


def cmd_campaign_pause(args, client) -> int:
    return _lifecycle(args, client, "pause")


def cmd_campaign_resume(args, client) -> int:
    return _lifecycle(args, client, "resume")


def cmd_campaign_status(args, client) -> int:
    result = _request(client, "GET", f"/campaigns/{args.campaign_id}")

    def human(doc):
        totals = doc["totals"]
        return "\n".join(
            [
                f"campaign {doc['id']}: {doc['state']}",
                f"  target: {doc['config']['target']}",
                f"  shape/scheduling: {doc['config']['pipeline_shape']}/{doc['config']['scheduling']}",
                f"  seeds processed: {totals['seeds_processed']}",
                f"  cost: {totals['cost']:.4f}",
                f"  wall time: {totals['wall_time']:.1f}s",
                f"  triage: {totals['true_positives']} tp / {totals['false_positives']} fp / {totals['duplicates']} dup",
            ]
        )

    _emit(args, result, human)
    return 0


# -- scenarios ----------------------------------------------------------------


def cmd_scenarios_list(args, client) -> int:
    params = {"state": args.state} if args.state else {}
    result = _request(client, "GET", f"/campaigns/{args.campaign}/scenarios", params=params)

    def human(docs):
        if not docs:
            return "no scenarios"
        lines = []
        for s in docs:
            where = ", ".join(
                f"{loc['file']}:{loc['line_start']}-{loc['line_end']}" for loc in s["locations"]
            )
            lines.append(f"{s['id']}  [{s['state']}]  {where}")
            lines.append(f"    {s['hypothesis']}")
        return "\n".join(lines)

    _emit(args, result, human)
    return 0


# -- reports --------------------------------------------------------------------


def _report_markdown(report: dict[str, Any], scenario: dict[str, Any] | None) -> str:
    """One self-contained document per finding."""
    lines = [
        f"# {report['title']}",
        "",
        f"Report `{report['id']}` from seed `{report['seed_id']}`, scenario `{report['scenario_id']}`.",
        "",
        "## Summary",
        "",
        report["root_cause"],
        "",
        "## Trigger conditions",
        "",
        report["mechanism"],
    ]
    if scenario and scenario.get("trigger_path"):
        lines += ["", f"Trigger path: {scenario['trigger_path']}"]
    lines += [
        "",
        "## Reproduction",
        "",
        "```js",
        report["poc"].rstrip("\n"),
        "```",
        "",
        "Release build output:",
        "",
        "```",
        report["release_output"].rstrip("\n"),
        "```",
        "",
        "Debug build output:",
        "",
        "```",
        report["debug_output"].rstrip("\n"),
        "```",
    ]
    if report.get("suggested_patch"):
        lines += ["", "## Suggested patch", "", "```", report["suggested_patch"].rstrip("\n"), "```"]
    if report.get("triage"):
        verdict = report["triage"]
        lines += ["", f"Triage: {verdict['verdict']} ({verdict['note']})" if verdict.get("note") else f"Triage: {verdict['verdict']}"]
    return "\n".join(lines) + "\n"


def cmd_reports_export(args, client) -> int:
    reports = _request(client, "GET", f"/campaigns/{args.campaign}/reports")
    if args.format == "structured":
        print(json.dumps(reports, indent=2, sort_keys=True))
        return 0
    scenarios = {
        s["id"]: s for s in _request(client, "GET", f"/campaigns/{args.campaign}/scenarios")
    }
    documents = [_report_markdown(r, scenarios.get(r["scenario_id"])) for r in reports]
    print("\n---\n\n".join(documents) if documents else "no reports")
    return 0


# -- metrics --------------------------------------------------------------------


def cmd_metrics_show(args, client) -> int:
    result = _request(client, "GET", f"/campaigns/{args.campaign_id}/metrics")

    def human(doc):
        rate = doc["coverage_pass_rate"]
        lines = [
            f"campaign {doc['campaign_id']}",
            f"  coverage pass rate: {'n/a' if rate is None else f'{rate:.2f}'}"
            f" ({doc['scenarios_decided']} decided)",
            f"  seeds processed: {doc['seeds_processed']}",
            f"  total cost: {doc['total_cost']:.4f}",
            f"  total wall time: {doc['total_wall_time']:.1f}s",
            f"  reports: {doc['reports']}"
            f" ({doc['true_positives']} tp / {doc['false_positives']} fp / {doc['duplicates']} dup)",
        ]
        if "avg_cost_per_seed" in doc:
            lines.append(f"  avg cost per seed: {doc['avg_cost_per_seed']:.4f}")
            lines.append(f"  avg time per seed: {doc['avg_time_per_seed']:.1f}s")
        counts = ", ".join(f"{k}={v}" for k, v in doc["scenario_counts"].items() if v)
        lines.append(f"  scenarios: {counts or 'none'}")
        return "\n".join(lines)

    _emit(args, result, human)
    return 0


# -- executor access ---------------------------------------------------------------


def cmd_exec_poke(args, client) -> int:
    poc = Path(args.poc).read_text(encoding="utf-8")
    result = _request(client, "POST", "/exec/poke", json={"poc": poc, "build": args.build})

    def human(doc):
        exit_info = doc["exit"]
        lines = [f"exit: {exit_info['kind']}", f"evidence: {doc['evidence']}"]
        if exit_info.get("signal"):
            lines.append(f"signal: {exit_info['signal']}")
        if exit_info.get("assertion_kind"):
            lines.append(f"assertion: {exit_info['assertion_kind']}")
        for warning in doc["warnings"]:
            lines.append(f"warning [{warning['kind']}]: {warning['message']}")
        if doc["stdout"]:
            lines.append(f"stdout:\n{doc['stdout'].rstrip()}")
        if doc["stderr"]:
            lines.append(f"stderr:\n{doc['stderr'].rstrip()}")
        return "\n".join(lines)

    _emit(args, result, human)
    return 0


# -- wiring ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="variantlab", description="Operate a variant-hunting service."
    )
    parser.add_argument(
        "--api",
        default=os.environ.get("VARIANTLAB_API", DEFAULT_API),
        help=f"service base URL (env VARIANTLAB_API, default {DEFAULT_API})",
    )
    parser.add_argument(
        "--token",
        default=os.environ.get("VARIANTLAB_TOKEN"),
        help="bearer token (env VARIANTLAB_TOKEN)",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    groups = parser.add_subparsers(dest="group", required=True)

    corpus = groups.add_parser("corpus", help="seed corpus operations").add_subparsers(
        dest="command", required=True
    )
    ingest = corpus.add_parser("ingest", help="load a tracker export file")
    ingest.add_argument("export_file")
    ingest.set_defaults(func=cmd_corpus_ingest)
    pre = corpus.add_parser("preanalyze", help="run pre-analysis over seeds")
    pre.add_argument("--all", action="store_true", help="every valid seed")
    pre.add_argument("--seed", help="one seed id")
    pre.set_defaults(func=cmd_corpus_preanalyze)

    campaign = groups.add_parser("campaign", help="campaign lifecycle").add_subparsers(
        dest="command", required=True
    )
    create = campaign.add_parser("create", help="create from a config file")
    create.add_argument("--config", required=True)
    create.set_defaults(func=cmd_campaign_create)
    for action, handler in (
        ("start", cmd_campaign_start),
        ("pause", cmd_campaign_pause),
        ("resume", cmd_campaign_resume),
        ("status", cmd_campaign_status),
    ):
        sub = campaign.add_parser(action)
        sub.add_argument("campaign_id")
        sub.set_defaults(func=handler)

    scenarios = groups.add_parser("scenarios", help="scenario queries").add_subparsers(
        dest="command", required=True
    )
    slist = scenarios.add_parser("list")
    slist.add_argument("--campaign", required=True)
    slist.add_argument("--state")
    slist.set_defaults(func=cmd_scenarios_list)

    reports = groups.add_parser("reports", help="report export").add_subparsers(
        dest="command", required=True
    )
    export = reports.add_parser("export")
    export.add_argument("--campaign", required=True)
    export.add_argument("--format", choices=("structured", "markdown"), default="structured")
    export.set_defaults(func=cmd_reports_export)

    metrics = groups.add_parser("metrics", help="campaign metrics").add_subparsers(
        dest="command", required=True
    )
    show = metrics.add_parser("show")
    show.add_argument("campaign_id")
    show.set_defaults(func=cmd_metrics_show)

    executor = groups.add_parser("exec", help="direct executor access").add_subparsers(
        dest="command", required=True
    )
    poke = executor.add_parser("poke")
    poke.add_argument("--poc", required=True, help="file holding the program to run")
    poke.add_argument("--build", choices=("release", "debug"), default="release")
    poke.set_defaults(func=cmd_exec_poke)

    return parser


def main(argv: list[str] | None = None, client: httpx.Client | None = None) -> int:
    args = build_parser().parse_args(argv)
    owns_client = client is None
    if client is None:
        headers = {"Authorization": f"Bearer {args.token}"} if args.token else {}
        client = httpx.Client(base_url=args.api, headers=headers, timeout=60.0)
    try:
        return args.func(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if owns_client:
            client.close()


if __name__ == "__main__":
    sys.exit(main())
