"""Structured JSON reports emitted by the command line tools.

Reports are plain dicts validating against :data:`REPORT_SCHEMA`. They are
deterministic functions of (arguments, file bytes, seed) except for the
``timings_ms`` section. Serialization sorts keys so equal reports produce
equal bytes.
"""

from __future__ import annotations

import json

SCHEMA_VERSION = 1

ATTENTION_ERROR_SCHEMA = {
    "type": "object",
    "required": [
        "r_measured", "sandwich_holds", "eps_star", "entry_bound_ok",
        "exp_rel_err", "exp_bound", "rowsum_rel_err", "rowsum_bound",
        "attention_inf_err", "attention_bound", "c1", "c2",
        "bounds_applicable", "bounds_pass",
    ],
    "properties": {
        "r_measured": {"type": "number", "minimum": 0},
        "sandwich_holds": {"type": "boolean"},
        "eps_star": {"type": ["number", "null"], "minimum": 0},
        "entry_bound_ok": {"type": "boolean"},
        "exp_rel_err": {"type": "number", "minimum": 0},
        "exp_bound": {"type": "number", "minimum": 0},
        "rowsum_rel_err": {"type": "number", "minimum": 0},
        "rowsum_bound": {"type": "number", "minimum": 0},
        "attention_inf_err": {"type": "number", "minimum": 0},
        "attention_bound": {"type": "number", "minimum": 0},
        "c1": {"type": "number"},
        "c2": {"type": "number"},
        "bounds_applicable": {"type": "boolean"},
        "bounds_pass": {"type": ["boolean", "null"]},
    },
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["schema", "command", "config", "input"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "command": {"type": "string"},
        "config": {"type": "object"},
        "input": {
            "type": "object",
            "required": ["n", "d", "nnz", "r_measured"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "d": {"type": "integer", "minimum": 1},
                "nnz": {"type": "integer", "minimum": 0},
                "r_measured": {"type": "number", "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "required": ["m", "nonzero_weights"],
            "properties": {
                "m": {"type": "integer", "minimum": 0},
                "nonzero_weights": {"type": "integer", "minimum": 0},
            },
        },
        "attention_error": ATTENTION_ERROR_SCHEMA,
        "timings_ms": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0},
        },
    },
    "additionalProperties": False,
}


def build_report(command, config, input_stats, output_stats=None,
                 attention_error=None, timings_ms=None) -> dict:
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "input": input_stats,
    }
    if output_stats is not None:
        report["output"] = output_stats
    if attention_error is not None:
        report["attention_error"] = attention_error
    if timings_ms is not None:
        report["timings_ms"] = {k: float(v) for k, v in timings_ms.items()}
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def strip_timings(report: dict) -> dict:
    """Copy of a report without the (run-dependent) timing section."""
    return {k: v for k, v in report.items() if k != "timings_ms"}
