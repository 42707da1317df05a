from __future__ import annotations
from typing import Any, Dict, List, Optional, Tuple
import argparse
import json
import logging
import sys
import warnings

import numpy as np

from hustab import OutputFormat, NUMERICS, NumericSettings, constantGap, lowerBound
from hustab.classes import JsonDict
from hustab.config import (
    DEFAULT_CONFIG,
    RunConfig,
    buildDichotomy,
    buildProblem,
    buildPseudoSolution,
    loadConfig,
    scenarioParameters,
)
from hustab.errors import ConfigError, HusError
from hustab.hus_bounds import LowerBoundQuery, UpperConstantQuery, sweepTable, upperHusConstant
from hustab.other_constants import CERTIFICATE_KEYS, EXIT_CERTIFICATE, EXIT_OK, GAP_REPORT_KEYS, SCENARIO_NAMES
from hustab.report import buildReport, emit, render, writeTrajectories
from hustab.scenarios import runScenario
from hustab.shadowing import picardSolve

logger = logging.getLogger("hustab")


def parseAssignments(items: Optional[List[str]], option: str) -> Dict[str, Any]:
    """
    KEY=VALUE pairs, values read as JSON when possible ("2", "inf", "[1, 2]")
    """
    out: Dict[str, Any] = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"Expected KEY=VALUE, got '{item}'", field=option)
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out[key.strip()] = value
    return out


def cmdConstants(config: RunConfig, settings: NumericSettings) -> Tuple[JsonDict, bool, Optional[List[JsonDict]]]:
    """
    Upper constant of the configured dichotomy and, for 2×2 expansions,
    the gap with the best lower bound
    """
    A = config.requireMatrix()
    triple = config.triple
    spec = buildDichotomy(config, settings)
    result: JsonDict = {
        "triple": triple.toJson(),
        "dichotomy": spec.toJson(),
        "c": config.c,
        "upper_hus_constant": upperHusConstant(UpperConstantQuery(spec, config.c, triple)),
    }
    if A.shape == (2, 2) and np.all(np.linalg.eigvals(A).real > 0):
        gap = constantGap(A, triple, config.gammaGrid, config.uGrid, config.delta, settings)
        result["gap"] = gap.toJson()
        if config.uGrid is not None and config.gammaGrid is not None:
            result["lower_bounds"] = [
                {"u": u, "gamma": g, "lower": lowerBound(LowerBoundQuery(A, u, g, triple), settings)}
                for u in config.uGrid for g in config.gammaGrid
            ]
    rows = [{key: result["gap"][key] for key in GAP_REPORT_KEYS}] if "gap" in result else None
    return result, True, rows

def cmdSolve(config: RunConfig, settings: NumericSettings) -> Tuple[JsonDict, bool, Optional[List[JsonDict]], Dict[str, Any]]:
    prob = buildProblem(config, settings)
    pseudo = buildPseudoSolution(config, prob, settings)
    x, certificate = picardSolve(pseudo, prob, config.triple, settings=settings)
    data = certificate.toJson()
    result = {
        "problem": prob.toJson(),
        "certificate": data,
    }
    return result, certificate.converged, [{key: data[key] for key in CERTIFICATE_KEYS}], {"x": x, "y": pseudo.y}

def cmdScenario(
    name: str,
    config: RunConfig,
    overrides: Dict[str, Any],
    settings: NumericSettings,
) -> Tuple[JsonDict, bool, Optional[List[JsonDict]], Dict[str, Any]]:
    parameters = dict(config.scenario.parameters) if config.scenario.name == name else {}
    parameters.update(scenarioParameters(name, overrides, "--set"))
    report = runScenario(name, parameters, settings)
    for failure in report.failures:
        print(
            f"Assertion '{failure.name}' failed: computed {failure.computed:.9g}, "
            f"expected {failure.relation} {failure.expected:.9g} (tolerance {failure.tolerance:g})",
            file=sys.stderr,
        )
    rows = [a.toJson() for a in report.assertions]
    return report.toJson(), report.passed, rows, report.trajectories

def cmdSweep(config: RunConfig, settings: NumericSettings) -> Tuple[JsonDict, bool, Optional[List[JsonDict]]]:
    A = config.requireMatrix()
    rows = sweepTable(config.sweepAxis, A, config.triple, config.sweepValues, settings)
    return {"axis": config.sweepAxis.value, "rows": rows}, True, rows


def main():
    parser = argparse.ArgumentParser(description="Hyers-Ulam stability constants and shadowing certificates")
    parser.add_argument(
        "command",
        choices=["constants", "solve", "scenario", "sweep"],
        nargs="?",
        help="what to run",
    )
    parser.add_argument(
        "scenarioName",
        metavar="scenario_name",
        nargs="?",
        choices=SCENARIO_NAMES,
        help="built-in scenario, for the scenario command",
    )
    parser.add_argument(
        "--config",
        metavar="config_path",
        dest="configPath",
        help="location of the RunConfig json file",
    )
    parser.add_argument(
        "--out",
        "-o",
        metavar="out_path",
        dest="outPath",
        help="write the report here instead of stdout",
    )
    parser.add_argument(
        "--format",
        "-f",
        default=None,
        choices=list(OutputFormat.values()),
        dest="outputFormat",
        help="report format (default: csv for sweep, json otherwise)",
    )
    parser.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        dest="assignments",
        help="scenario parameter override, repeatable",
    )
    parser.add_argument(
        "--numerics",
        metavar="KEY=VALUE",
        action="append",
        dest="numerics",
        help="numerical setting override (e.g. nodes=2048), repeatable",
    )
    parser.add_argument(
        "--trajectories",
        action="store_true",
        help="with --out, also write the trajectories as csv files next to the report",
    )
    parser.add_argument(
        "--print-defaults",
        action="store_true",
        dest="printDefaults",
        help="print the default configuration and numerical settings, then exit",
    )
    parser.add_argument(
        "--no-progress",
        action="store_false",
        dest="showProgress",
        help="hide progress bars",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="log progress messages (-vv for debugging output)",
    )

    args = parser.parse_args()

    level = logging.WARNING if args.verbose == 0 else (logging.INFO if args.verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    warnings.simplefilter("default")

    if args.printDefaults:
        emit(render({"config": DEFAULT_CONFIG, "numerics": NUMERICS.toJson()}, None, OutputFormat.JSON))
        exit(EXIT_OK)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("A command is required", file=sys.stderr)
        exit(ConfigError.exitCode)
    if args.command == "scenario" and args.scenarioName is None:
        print(f"The scenario command needs one of: {', '.join(SCENARIO_NAMES)}", file=sys.stderr)
        exit(ConfigError.exitCode)

    try:
        config = loadConfig(args.configPath)
        numerics = {**config.numerics, **parseAssignments(args.numerics, "--numerics")}
        settings = NUMERICS.withOverrides({**numerics, "show_progress": args.showProgress})

        trajectories: Dict[str, Any] = {}
        if args.command == "constants":
            result, passed, rows = cmdConstants(config, settings)
        elif args.command == "solve":
            result, passed, rows, trajectories = cmdSolve(config, settings)
        elif args.command == "scenario":
            overrides = parseAssignments(args.assignments, "--set")
            result, passed, rows, trajectories = cmdScenario(args.scenarioName, config, overrides, settings)
        else:
            result, passed, rows = cmdSweep(config, settings)
    except HusError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        exit(err.exitCode)

    # Settings are reported without the display toggle, which does not change results
    reported = settings.toJson()
    reported.pop("show_progress", None)
    report = buildReport(args.command, config.toJson(), result, passed, reported)
    defaultFormat = OutputFormat.CSV if args.command == "sweep" else OutputFormat.JSON
    outputFormat = OutputFormat(args.outputFormat) if args.outputFormat is not None else defaultFormat
    emit(render(report, rows, outputFormat), args.outPath)
    if args.trajectories and args.outPath is not None and trajectories:
        for path in writeTrajectories(trajectories, args.outPath):
            logger.info("Wrote %s", path)

    exit(EXIT_OK if passed else EXIT_CERTIFICATE)

if __name__ == '__main__':
    main()
