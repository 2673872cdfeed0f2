"""
SiMPL 实验命令行

    python main.py run <config>        运行优化，写出历史、VTK、PGM 与摘要
    python main.py validate <config>   只解析并校验配置、构造问题
    python main.py oracle <name>       运行参照解并打印结果（--list 列出全部）

退出码：0 收敛，2 达到最大迭代数，1 出错
"""
import os
import sys

from config import Config


def _configure_threads():
    # 必须在导入 numpy/scipy 之前设置
    value = os.environ.get(Config.THREADS_ENV_VAR)
    if value:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = value


_configure_threads()

import argparse
import json
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import psutil

from errors import OptimizationAborted, SimplError
from field import write_pgm, write_vtk
from logger import solver_logger
from module_loader import ModuleLoader
from optimizer import IterationRecord, OptHistory, SimplResult, simpl_run
from registry import plugin_registry
from run_config import RunConfig, describe, load_run_config

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_MAX_ITERS = 2


class _MemorySampler:
    """按迭代采样常驻内存，记录最大值"""

    def __init__(self):
        self._process = psutil.Process()
        self.peak = 0

    def sample(self) -> int:
        rss = self._process.memory_info().rss
        self.peak = max(self.peak, rss)
        return rss


def _report_error(error: SimplError):
    print(f"❌ {error}", file=sys.stderr)
    solver_logger.log_error(error.message, error.to_dict())


def _prepare(config_path: str):
    """加载插件、解析配置并构造问题；失败时不写任何文件"""
    ModuleLoader().load_all_modules()
    cfg = load_run_config(config_path)
    builder = plugin_registry.get_problem(cfg.problem)["builder"]
    problem, P, C = builder(cfg.problem_config)
    return cfg, problem, P, C


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if hasattr(value, "tolist"):
        value = value.tolist()
    if isinstance(value, list):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def write_summary(path: Path, entries: Dict[str, object]) -> Path:
    """key: value 文本摘要"""
    lines = [f"{key}: {_format_value(value)}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _summary_entries(cfg: RunConfig, history: OptHistory, status: str, wall: float,
                     sampler: _MemorySampler, F_initial: Optional[float] = None,
                     F_final: Optional[float] = None) -> Dict[str, object]:
    entries: Dict[str, object] = {"problem": cfg.problem, "status": status, "iterations": len(history)}
    if F_initial is not None:
        entries["F_initial"] = F_initial
    if len(history):
        entries["F_final"] = F_final if F_final is not None else history[-1].F
        entries["res_final"] = history[-1].res
        res0 = history[0].res
        entries["res_relative"] = history[-1].res / res0 if res0 > 0 else 0.0
        entries["max_backtracks"] = int(history.series("backtracks").max())
        entries["backtracks_exhausted"] = int(history.series("backtracks_exhausted").sum())
        entries["min_lambda"] = float(history.series("min_lambda").min())
    entries["wall_time_s"] = wall
    entries["peak_rss_mb"] = sampler.peak / 2 ** 20
    return entries


def _write_final_fields(out: Path, problem, result: SimplResult):
    state = problem.state(result.eta)
    write_vtk(out / "design_final.vtk", result.eta.mesh,
              cell_fields={"eta": result.eta, "psi": result.psi},
              point_fields={"eta_filtered": state.filtered, "displacement": state.displacement})
    for c in range(result.eta.channels):
        write_pgm(out / f"eta_{c + 1}_final.pgm", result.eta.mesh, result.eta.values[:, c])


def run(config_path: str) -> int:
    """运行一次优化实验，返回退出码"""
    try:
        cfg, problem, P, C = _prepare(config_path)
    except SimplError as e:
        _report_error(e)
        return EXIT_ERROR

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    solver_logger.setup_logger(log_dir=out)
    solver_logger.log_system_event("RUN_STARTED", {
        "config": str(cfg.path), "problem": cfg.problem, "output_dir": str(out),
        "cells": problem.mesh.cell_count, "polytope": repr(P), "constraints": C.count,
    })

    sampler = _MemorySampler()
    sampler.sample()

    def on_iteration(record: IterationRecord, eta, psi):
        sampler.sample()
        if cfg.snapshot_period and (record.k + 1) % cfg.snapshot_period == 0:
            write_vtk(out / "snapshots" / f"design_{record.k:04d}.vtk", eta.mesh,
                      cell_fields={"eta": eta, "psi": psi}, title=f"simpl design k={record.k}")

    start = time.perf_counter()
    try:
        result = simpl_run(problem, P, C, problem.psi0, cfg.optimizer, callback=on_iteration)
    except OptimizationAborted as e:
        history = e.history if e.history is not None else OptHistory(C.count)
        history.to_csv(out / "history.csv")
        entries = _summary_entries(cfg, history, "error", time.perf_counter() - start, sampler)
        entries["error"] = e.message
        write_summary(out / "summary.txt", entries)
        _report_error(e)
        solver_logger.close_file_sink()
        return EXIT_ERROR

    try:
        result.history.to_csv(out / "history.csv")
        _write_final_fields(out, problem, result)
        sampler.sample()
        entries = _summary_entries(cfg, result.history, result.status, time.perf_counter() - start,
                                   sampler, F_initial=result.F_initial, F_final=result.F)
        entries.update(problem.report(result.eta))
        write_summary(out / "summary.txt", entries)
    except SimplError as e:
        _report_error(e)
        return EXIT_ERROR
    finally:
        solver_logger.close_file_sink()

    solver_logger.success(f"✅ {cfg.problem}: {result.status} after {result.iterations} iterations, F = {result.F:.10g}")
    return EXIT_CONVERGED if result.converged else EXIT_MAX_ITERS


def validate(config_path: str) -> int:
    """校验配置并构造问题（不运行优化，不写文件）"""
    try:
        cfg, problem, P, C = _prepare(config_path)
    except SimplError as e:
        _report_error(e)
        return EXIT_ERROR
    print(f"✅ 配置有效: {cfg.path}")
    for line in describe(cfg):
        print(f"  {line}")
    print(f"  cells           : {problem.mesh.cell_count}")
    print(f"  polytope        : {P!r}")
    print(f"  constraints     : {C.count}")
    return EXIT_CONVERGED


def run_oracle(name: Optional[str], list_only: bool = False) -> int:
    """运行指定的参照解并以 JSON 打印"""
    ModuleLoader().load_all_modules()
    if list_only or not name:
        print("🧪 可用的 oracle:")
        for oracle_name in plugin_registry.oracle_names():
            print(f"  {oracle_name}: {plugin_registry.oracles[oracle_name]['doc']}")
        return EXIT_CONVERGED

    func = plugin_registry.get_oracle(name)
    if func is None:
        print(f"❌ 未知的 oracle: {name}; 可用: {plugin_registry.oracle_names()}", file=sys.stderr)
        return EXIT_ERROR
    try:
        result = func()
    except SimplError as e:
        _report_error(e)
        return EXIT_ERROR
    print(json.dumps(result, indent=2, ensure_ascii=False, default=lambda v: np.asarray(v).tolist()))
    return EXIT_CONVERGED


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="SiMPL 多材料拓扑优化实验工具")
    subparsers = parser.add_subparsers(dest="command", help="可用命令")

    run_parser = subparsers.add_parser("run", help="运行优化")
    run_parser.add_argument("config", help="配置文件路径")

    validate_parser = subparsers.add_parser("validate", help="校验配置")
    validate_parser.add_argument("config", help="配置文件路径")

    oracle_parser = subparsers.add_parser("oracle", help="运行参照解")
    oracle_parser.add_argument("name", nargs="?", help="oracle 名称")
    oracle_parser.add_argument("--list", action="store_true", help="列出所有 oracle")

    args = parser.parse_args(argv)

    if args.command == "run":
        return run(args.config)
    elif args.command == "validate":
        return validate(args.config)
    elif args.command == "oracle":
        return run_oracle(args.name, args.list)
    else:
        parser.print_help()
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
