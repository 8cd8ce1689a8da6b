"""
Loop Solver
Command-line entry point: solve, sweep, verify and export closed loops of prescribed curvature
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from components.functional import energy, g_line, g_winding
from components.mountainpass import (CriticalPointResult, MountainPassEstimate, SolverOptions, SweepEntry,
                                     estimate_c, lambda_sweep, refine_critical, sweep_row)
from components.paths import circle_loop, initial_path
from components.verify import VerifyThresholds, circle_oracle, verify_loop
from utils.errors import (CollapseToConstant, ConfigurationError, IndexAmbiguity, LoopSolverError, SignMismatch,
                          WrongKind)
from utils.fields import CurvatureField, FieldCatalog
from utils.loop_io import (SweepTable, dumps, read_loop, write_index_map, write_json, write_loop_csv, write_loop_json,
                           write_path)
from utils.loopgeom import LoopCurve, barycenter, length_energy, loop_metrics
from utils.rendering import LoopRenderer
from utils.run_config import RunConfig
from utils.winding import index_map, perturb_generic, resolved_index_map

logger = logging.getLogger("loop_solver")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIGURATION = 2


class LoopSolverApp:
    """Runs one subcommand against one configuration"""

    def __init__(self):
        self.catalog = FieldCatalog()

    def build_field(self, config: RunConfig) -> CurvatureField:
        return self.catalog.build_from_spec(config.field)

    @staticmethod
    def solver_options(config: RunConfig) -> SolverOptions:
        return SolverOptions(**config.solver)

    @staticmethod
    def thresholds(config: RunConfig) -> VerifyThresholds:
        return VerifyThresholds(**config.verify)

    @staticmethod
    def require_lambda(config: RunConfig) -> float:
        if config.lam is None:
            raise ConfigurationError("This command needs a single 'lambda'")
        return config.lam

    def start_loop(self, config: RunConfig, field: CurvatureField) -> Optional[LoopCurve]:
        """Explicit start loop from the 'start' section, if any"""
        start = config.start
        if start is None:
            return None
        if "file" in start:
            return read_loop(start["file"])
        if "circle" in start:
            circle = start["circle"]
            return circle_loop(float(circle.get("radius", 1.0)), tuple(circle.get("center", (0.0, 0.0))),
                               int(circle.get("j", 1)), config.points)
        if "oracle" in start:
            return circle_oracle(field, self.require_lambda(config), int(start["oracle"]), config.points).loop
        raise ConfigurationError("'start' needs one of 'file', 'circle' or 'oracle'")

    @staticmethod
    def winding_cross_check(u: LoopCurve, field: CurvatureField, seed: int) -> Optional[float]:
        """G on a generic perturbation of u by the index-map integral"""
        try:
            return g_winding(perturb_generic(u, seed), field)
        except IndexAmbiguity as exc:
            logger.warning("Index-map cross-check skipped: %s", exc)
            return None

    @staticmethod
    def path_rows(nodes, field: CurvatureField, lam: float) -> List[Dict[str, float]]:
        """Per-node energy table for the path export"""
        parameters = np.linspace(0.0, 1.0, len(nodes))
        rows = []
        for s, u in zip(parameters, nodes):
            length, g_value = length_energy(u), g_line(u, field)
            rows.append({"s": float(s), "E": length + lam * g_value, "L": length, "G": g_value})
        return rows

    # Subcommands

    def cmd_solve(self, config: RunConfig) -> int:
        """Mountain-pass estimate, refinement to a critical loop, verification and artifacts"""
        lam = self.require_lambda(config)
        field = self.build_field(config)
        options = self.solver_options(config)
        output = config.output_path
        output.mkdir(parents=True, exist_ok=True)

        estimate: Optional[MountainPassEstimate] = None
        start = self.start_loop(config, field)
        if start is None:
            path = initial_path(field, config.lambda_range, config.path["constructor"], config.points,
                                config.path["nodes"])
            estimate = estimate_c(path, field, lam, options)
            logger.info("Mountain-pass estimate %.10g (%s after %d iterations)",
                        estimate.c_estimate, estimate.status, estimate.iterations)
            write_path(estimate.path_final.nodes, self.path_rows(estimate.path_final.nodes, field, lam),
                       output / "path", meta={"constructor": path.constructor, "lambda": lam,
                                              "endpoint_energy": path.endpoint_energy})
            start = estimate.argmax_loop

        payload: Dict[str, Any] = {
            "config": config.to_dict(),
            "estimate": estimate.to_dict() if estimate else None,
        }
        try:
            critical = refine_critical(start, field, lam, options)
        except CollapseToConstant as exc:
            logger.error("Refinement collapsed: %s", exc)
            payload["critical_point"] = None
            payload["error"] = {"type": "CollapseToConstant", "message": str(exc),
                                "length_history": exc.length_history}
            write_json(payload, output / "result.json")
            return EXIT_NUMERICAL

        return self.write_loop_artifacts(critical, field, lam, config, estimate, payload)

    def write_loop_artifacts(self, critical: CriticalPointResult, field: CurvatureField, lam: float,
                             config: RunConfig, estimate: Optional[MountainPassEstimate],
                             payload: Dict[str, Any]) -> int:
        """Verify the refined loop, write its files and pick the exit code"""
        output = config.output_path
        loop = critical.loop
        report = verify_loop(loop, field, lam, self.thresholds(config), estimate)
        payload.update({
            "critical_point": critical.to_dict(),
            "verification": report.to_dict(),
            "energy": energy(loop, field, lam).to_dict(),
            "metrics": loop_metrics(loop).to_dict(),
            "barycenter": barycenter(loop).tolist(),
            "g_winding": self.winding_cross_check(loop, field, config.seed),
        })
        write_json(payload, output / "result.json")
        write_loop_csv(loop, output / "loop.csv")
        write_loop_json(loop, output / "loop.json")
        LoopRenderer.write_svg(loop, field, output / "loop.svg")

        if critical.converged and report.passed:
            logger.info("Solved: energy %.10g, residual %.3e", critical.energy, critical.ode_residual)
            return EXIT_OK
        failed = [record.name for record in report.details if not record.passed]
        logger.error("Run finished with status '%s'; failed checks: %s", critical.status, failed or "none")
        return EXIT_NUMERICAL

    def cmd_sweep(self, config: RunConfig) -> int:
        """Levels over the lambda grid; the CSV is valid after every completed lambda"""
        field = self.build_field(config)
        grid = config.lambda_grid if config.lambda_grid is not None else [config.lam]
        output = config.output_path
        table = SweepTable(output / "sweep.csv")

        def flush(entry: SweepEntry, quotient: Optional[float]):
            table.append(sweep_row(entry, quotient))
            write_json(entry.to_dict(), output / "runs" / f"lambda_{entry.lam:+.6g}.json")

        sweep = lambda_sweep(field, grid, self.solver_options(config), config.points, config.path["nodes"],
                             config.path["constructor"], on_entry=flush)
        table.rewrite(sweep.rows())
        write_json({"config": config.to_dict(), "sweep": sweep.to_dict()}, output / "sweep.json")
        flagged = [lam for lam, flag in zip(sweep.lambdas, sweep.flagged) if flag]
        if flagged:
            logger.warning("Difference quotients blow up at lambda %s", flagged)
        if sweep.scaled_level_spread is not None:
            logger.info("Spread of |lambda| c over the grid: %.3e", sweep.scaled_level_spread)
        if all(entry.converged for entry in sweep.entries):
            return EXIT_OK
        return EXIT_NUMERICAL

    def cmd_verify(self, loop_file, config: RunConfig) -> int:
        """Check a loop file against the thresholds; the report goes to stdout"""
        lam = self.require_lambda(config)
        field = self.build_field(config)
        loop = read_loop(loop_file)
        report = verify_loop(loop, field, lam, self.thresholds(config))
        payload = {"loop_file": str(loop_file), "lambda": lam, "verification": report.to_dict()}
        sys.stdout.write(dumps(payload))
        return EXIT_OK if report.passed else EXIT_NUMERICAL

    def cmd_export(self, loop_file, config: RunConfig) -> int:
        """SVG over the K heatmap, loop CSV/JSON and the index map of a loop file"""
        field = self.build_field(config)
        loop = read_loop(loop_file)
        output = config.output_path / "export"
        stem = Path(loop_file).stem
        LoopRenderer.write_svg(loop, field, output / f"{stem}.svg")
        write_loop_csv(loop, output / f"{stem}.csv")
        write_loop_json(loop, output / f"{stem}.json")
        try:
            grid = resolved_index_map(loop)
        except IndexAmbiguity as exc:
            logger.warning("%s; exporting the unrefined map", exc)
            grid = index_map(loop)
        write_index_map(grid, output / f"{stem}_index")
        write_json(loop_metrics(loop).to_dict(), output / f"{stem}_metrics.json")
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loop_solver",
                                     description="Closed plane loops whose curvature is a prescribed field")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="mountain-pass estimate and critical loop for one lambda")
    solve.add_argument("--config", required=True, help="run configuration JSON")

    sweep = commands.add_parser("sweep", help="mountain-pass levels over a lambda grid")
    sweep.add_argument("--config", required=True, help="run configuration JSON")

    verify = commands.add_parser("verify", help="check a loop file")
    verify.add_argument("loop", help="loop file (.csv with t,x,y or .json)")
    verify.add_argument("--config", required=True, help="run configuration JSON")

    export = commands.add_parser("export", help="render a loop file")
    export.add_argument("loop", help="loop file (.csv with t,x,y or .json)")
    export.add_argument("--config", required=True, help="run configuration JSON")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIGURATION if exc.code else EXIT_OK
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    app = LoopSolverApp()
    try:
        config = RunConfig.from_file(args.config)
        if args.command == "solve":
            return app.cmd_solve(config)
        if args.command == "sweep":
            return app.cmd_sweep(config)
        if args.command == "verify":
            return app.cmd_verify(args.loop, config)
        return app.cmd_export(args.loop, config)
    except (ConfigurationError, WrongKind, SignMismatch) as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIGURATION
    except LoopSolverError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except ValueError as exc:
        logger.error("Invalid request: %s", exc)
        return EXIT_CONFIGURATION


if __name__ == "__main__":
    sys.exit(main())
