import argparse
import logging
import sys
from typing import Sequence

from app import __version__
from service.exceptions import ScenarioError, ValidationError, WorkbenchError
from service.scenario import SubspaceSpec, load_scenario
from service.workbench import CONVERGENCE_CHECKS, Workbench
from utils.config_manager import apply_overrides, load_config
from utils.log_rotation import setup_debug_logging, setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='pybergman',
        description="Bergman シフトの遊走部分空間を有限次数で検証するワークベンチ",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help="シナリオの検査を実行する")
    run_parser.add_argument('scenario', help="シナリオファイル (JSON)")
    run_parser.add_argument('--cap', type=int, default=None, help="打ち切り次数")
    run_parser.add_argument('--tol', type=float, default=None, help="相対許容誤差")
    run_parser.add_argument('--samples', type=int, default=None, help="単位円上の標本数")
    run_parser.add_argument('--format', choices=('csv', 'jsonl'), default=None, help="出力形式")
    run_parser.add_argument('--stable', action='store_true', help="elapsed_ms を 0 にして出力を再現可能にする")
    run_parser.add_argument('--out', default=None, help="出力先ファイル（省略時は標準出力）")
    run_parser.add_argument('--jobs', type=int, default=None, help="並列に実行する検査の数")
    run_parser.set_defaults(handler=_run)

    convergence_parser = subparsers.add_parser('convergence', help="打ち切り次数に対する残差の推移を調べる")
    convergence_parser.add_argument('--scenario', default=None, help="部分空間を定義したシナリオファイル")
    convergence_parser.add_argument('--subspace', default=None, help="シナリオ内の部分空間名")
    convergence_parser.add_argument('--zeros', type=complex, nargs='+', default=None,
                                    help="零点（例: 0.5 -0.3333333333333333 0.1+0.2j）")
    convergence_parser.add_argument('--caps', type=int, nargs='+', default=[20, 40, 80], help="打ち切り次数の列")
    convergence_parser.add_argument('--check', choices=CONVERGENCE_CHECKS, default='radial_sum', help="残差の種類")
    convergence_parser.add_argument('--out', default=None, help="出力先ファイル（省略時は標準出力）")
    convergence_parser.set_defaults(handler=_convergence)

    oracle_parser = subparsers.add_parser('oracle', help="係数条件の三つの表示と重み j の和を並べる")
    oracle_parser.add_argument('scenario', help="ベクトルを定義したシナリオファイル")
    oracle_parser.add_argument('vector', help="シナリオ内のベクトル名")
    oracle_parser.add_argument('--kmax', type=int, default=None, help="比較する k の最大値（省略時は次数）")
    oracle_parser.add_argument('--out', default=None, help="出力先ファイル（省略時は標準出力）")
    oracle_parser.set_defaults(handler=_oracle)

    return parser


def _run(workbench: Workbench, args: argparse.Namespace) -> int:
    rows = workbench.run_file(args.scenario, args.cap, args.tol, args.samples)
    workbench.write_output(workbench.render_report(rows), args.out)
    workbench.print_summary(rows)
    return workbench.exit_code(rows)


def _convergence(workbench: Workbench, args: argparse.Namespace) -> int:
    if args.zeros is not None:
        if args.scenario is not None:
            raise ValidationError("--zeros と --scenario は同時に指定できません")
        spec = SubspaceSpec('zeros', zeros=tuple(args.zeros))
        vectors = {}
    else:
        if args.scenario is None or args.subspace is None:
            raise ValidationError("--zeros か、--scenario と --subspace を指定してください")
        scenario = load_scenario(args.scenario, workbench.cap, workbench.criterion_tol, workbench.samples)
        if args.subspace not in scenario.subspaces:
            raise ValidationError(f"未定義の部分空間です: {args.subspace}")
        spec = scenario.subspaces[args.subspace]
        vectors = scenario.vectors

    result = workbench.convergence(spec, vectors, args.caps, args.check)
    workbench.write_output(workbench.render_convergence(result), args.out)
    verdict = "非増加" if result.monotone else "増加あり"
    print(f"判定: {verdict}", file=sys.stderr)
    return 0 if result.monotone else 1


def _oracle(workbench: Workbench, args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, workbench.cap, workbench.criterion_tol, workbench.samples)
    if args.vector not in scenario.vectors:
        raise ValidationError(f"未定義のベクトルです: {args.vector}")
    q = scenario.vectors[args.vector]
    kmax = args.kmax if args.kmax is not None else max(q.effective_degree(), 1)

    rows = workbench.oracle(q, kmax)
    workbench.write_output(workbench.render_oracle(rows), args.out)
    return 0 if all(row.corrected_agrees for row in rows) else 1


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config()
        if args.command == 'run':
            apply_overrides(config, 'REPORT', {
                'format': args.format,
                'jobs': args.jobs,
                'stable': True if args.stable else None,
            })

        setup_logging(config)
        setup_debug_logging(config)

        logger = logging.getLogger(__name__)
        logger.info(f"{args.command} を開始します")

        workbench = Workbench(config)
        exit_code = args.handler(workbench, args)
        logger.info(f"{args.command} が終了しました (終了コード {exit_code})")
        return exit_code

    except ScenarioError as e:
        print(f"入力エラー: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"エラー: {e}", file=sys.stderr)
        return 2
    except PermissionError as e:
        print(f"権限エラー: {e}", file=sys.stderr)
        return 1
    except WorkbenchError as e:
        logging.error(f"計算エラー: {e}")
        print(f"計算エラー: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\n処理が中断されました", file=sys.stderr)
        return 130
    except Exception as e:
        logging.exception(f"予期しないエラーが発生しました: {e}")
        print(f"予期しないエラーが発生しました: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
