import configparser
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from service.bidisc import SymVector, reconstruct, slice_z0
from service.dirichlet import (
    adjoint_relation_residual,
    dirichlet_inner,
    dirichlet_inner_quadrature,
    embed,
    restrict,
)
from service.exceptions import EmptySpan, PremiseViolated, ValidationError, WorkbenchError
from service.frame import Frame, contains
from service.isometry import (
    PairedIsometry,
    circle_samples,
    default_sample_count,
    factorization_residual,
    intertwiner_check,
    isometry_residual,
)
from service.scenario import (
    WANDERING_PREFIX,
    CheckSpec,
    ReportRow,
    Scenario,
    SubspaceSpec,
    format_complex,
    format_float,
    load_scenario,
    parse_matrix,
    render_rows,
    render_table,
    validate_subspace,
)
from service.subspace import (
    InvariantModel,
    beurling_residual,
    generate_invariant,
    minimality_report,
    truncation_gap,
    wandering_of,
    zero_set_model,
)
from service.wandering import (
    CriterionReport,
    coeff_criterion,
    criterion_sums,
    cross_condition,
    is_wandering_span,
    orthonormal_system_check,
    radial_constancy,
    radial_sum,
    shift_gram,
)
from utils.config_manager import get_config_value, load_config

CONVERGENCE_SLACK = 1.1
CONVERGENCE_FLOOR = 1e-14
CONVERGENCE_CHECKS = ('radial_sum', 'orthonormal_system', 'invariance', 'minimality', 'beurling', 'truncation_gap')

ORACLE_COLUMNS = ('k', 'radial_c_minus_k', 'corrected_s_k', 'weight_j_s_k', 'shift_gram_g_k',
                  'corrected_agrees', 'weight_j_agrees')

# 属性名, セクション, キー
_SETTINGS = (
    ('cap', 'MODEL', 'cap'),
    ('max_cap', 'MODEL', 'max_cap'),
    ('criterion_tol', 'TOLERANCE', 'criterion_tol'),
    ('rank_tol', 'TOLERANCE', 'rank_tol'),
    ('degree_tol', 'TOLERANCE', 'degree_tol'),
    ('isometry_tol', 'TOLERANCE', 'isometry_tol'),
    ('guard', 'TOLERANCE', 'guard'),
    ('samples', 'SAMPLING', 'samples'),
    ('probe_count', 'SAMPLING', 'probe_count'),
    ('probe_seed', 'SAMPLING', 'probe_seed'),
    ('report_format', 'REPORT', 'format'),
    ('jobs', 'REPORT', 'jobs'),
    ('stable', 'REPORT', 'stable'),
)


@dataclass(frozen=True)
class ConvergenceRow:
    cap: int
    residual: float


@dataclass(frozen=True)
class ConvergenceResult:
    check: str
    rows: tuple[ConvergenceRow, ...]
    monotone: bool


@dataclass(frozen=True)
class OracleRow:
    k: int
    radial: complex
    corrected: complex
    weight_j: complex
    gram: complex
    corrected_agrees: bool
    weight_j_agrees: bool


@dataclass(frozen=True, eq=False)
class _Resolved:
    """シナリオ実行中に共有する、構築済みのモデルと遊走部分空間"""

    scenario: Scenario
    models: dict[str, InvariantModel | WorkbenchError]
    wandering: dict[str, Frame | WorkbenchError]

    def model(self, name: str) -> InvariantModel:
        value = self.models[name]
        if isinstance(value, WorkbenchError):
            raise value
        return value

    def frame(self, name: str) -> Frame:
        value = self.wandering[name]
        if isinstance(value, WorkbenchError):
            raise value
        return value

    def vector(self, reference: str) -> SymVector:
        if reference.startswith(WANDERING_PREFIX):
            return self.frame(reference[len(WANDERING_PREFIX):]).vectors[0]
        return self.scenario.vectors[reference]


class Workbench:
    """シナリオの検査、打ち切り次数の収束調査、係数条件の照合を行うクラス"""

    def __init__(self, config: configparser.ConfigParser | None = None):
        self.config = config if config is not None else load_config()
        self.logger = logging.getLogger(__name__)
        self.cap: int = 40
        self.max_cap: int = 200
        self.criterion_tol: float = 1e-10
        self.rank_tol: float = 1e-10
        self.degree_tol: float = 1e-13
        self.isometry_tol: float = 1e-8
        self.guard: int = 2
        self.samples: int = 0
        self.probe_count: int = 4
        self.probe_seed: int = 20220622
        self.report_format: str = 'csv'
        self.jobs: int = 1
        self.stable: bool = False
        self._checks: dict[str, Callable[[_Resolved, CheckSpec], CriterionReport]] = {
            'coeff_criterion': self._check_coeff_criterion,
            'radial_sum': self._check_radial_sum,
            'shift_gram': self._check_shift_gram,
            'cross_condition': self._check_cross_condition,
            'wandering_span': self._check_wandering_span,
            'round_trip': self._check_round_trip,
            'dirichlet_isometry': self._check_dirichlet_isometry,
            'adjoint_relation': self._check_adjoint_relation,
            'contains': self._check_contains,
            'invariance': self._check_invariance,
            'minimality': self._check_minimality,
            'orthonormal_system': self._check_orthonormal_system,
            'isometry': self._check_isometry,
            'intertwiner': self._check_intertwiner,
            'factorization': self._check_factorization,
        }
        self._load_settings()

    def _load_settings(self) -> None:
        """設定ファイルから打ち切り次数、許容誤差、標本数、出力形式を読み込む"""
        for attribute, section, key in _SETTINGS:
            default = getattr(self, attribute)
            try:
                value = get_config_value(self.config, section, key, default)
            except ValueError:
                self.logger.warning(f"{section}.{key} の値が不正です。デフォルト値 {default} を使用します")
                continue
            setattr(self, attribute, value)

        if self.report_format not in ('csv', 'jsonl'):
            self.logger.warning(f"出力形式 {self.report_format} は使用できません。csv を使用します")
            self.report_format = 'csv'
        if self.jobs < 1:
            self.logger.warning(f"jobs の値が不正です: {self.jobs}。1 を使用します")
            self.jobs = 1
        if not 0.0 < self.rank_tol < 1.0:
            self.logger.warning(f"rank_tol の値が不正です: {self.rank_tol}。1e-10 を使用します")
            self.rank_tol = 1e-10

        self.logger.info(f"打ち切り次数: {self.cap}, 許容誤差: {self.criterion_tol}, 並列数: {self.jobs}")

    def sample_points(self, scenario: Scenario) -> np.ndarray:
        count = scenario.samples if scenario.samples > 0 else default_sample_count(scenario.cap)
        return circle_samples(count)

    def build_model(self, spec: SubspaceSpec, vectors: dict[str, SymVector], cap: int) -> InvariantModel:
        if spec.zeros is not None:
            return zero_set_model(spec.zeros, cap, self.rank_tol)
        generators = [vectors[name] for name in spec.generators]
        return generate_invariant(generators, cap, self.rank_tol, self.degree_tol)

    def _resolve(self, scenario: Scenario) -> _Resolved:
        models: dict[str, InvariantModel | WorkbenchError] = {}
        wandering: dict[str, Frame | WorkbenchError] = {}
        for name, spec in scenario.subspaces.items():
            try:
                model = self.build_model(spec, scenario.vectors, scenario.cap)
                models[name] = model
            except WorkbenchError as e:
                self.logger.warning(f"部分空間 {name} を構築できません: {e}")
                models[name] = e
                wandering[name] = e
                continue

            frame = wandering_of(model)
            if frame.rank == 0:
                wandering[name] = EmptySpan(f"部分空間 {name} の遊走部分空間が空です")
            else:
                wandering[name] = frame
            self.logger.debug(f"部分空間 {name}: 次元 {model.dimension}, 遊走部分空間のランク {frame.rank}")
        return _Resolved(scenario, models, wandering)

    def run(self, scenario: Scenario) -> list[ReportRow]:
        """
        シナリオの検査を順に実行する

        Args:
            scenario: 検証済みのシナリオ

        Returns:
            シナリオの順序どおりのレポート行
        """
        self.logger.info(f"シナリオを実行します: {scenario.name} (検査 {len(scenario.checks)} 件, cap={scenario.cap})")
        resolved = self._resolve(scenario)
        execute = partial(self._execute, resolved)

        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                rows = list(executor.map(execute, scenario.checks))
        else:
            rows = [execute(check) for check in scenario.checks]

        failed = sum(1 for row in rows if not row.passed)
        self.logger.info(f"シナリオが完了しました: {scenario.name} (失敗 {failed} / {len(rows)} 件)")
        return rows

    def run_file(self, path: str | Path, cap: int | None = None, tol: float | None = None,
                 samples: int | None = None) -> list[ReportRow]:
        scenario = load_scenario(path, self.cap, self.criterion_tol, self.samples)
        return self.run(scenario.with_overrides(cap, tol, samples))

    def _execute(self, resolved: _Resolved, check: CheckSpec) -> ReportRow:
        scenario = resolved.scenario
        start = time.perf_counter()
        try:
            report = self._checks[check.check](resolved, check)
        except WorkbenchError as e:
            self.logger.warning(f"検査 {check.check} {list(check.objects)} を実行できませんでした: {e}")
            carried = getattr(e, 'report', None)
            if isinstance(carried, CriterionReport):
                report = CriterionReport(False, carried.worst_index, carried.worst_value, carried.tol, str(e))
            else:
                report = CriterionReport(False, 0, math.inf, scenario.tol, str(e))
        elapsed_ms = (time.perf_counter() - start) * 1000.0

        if not report.passed:
            self.logger.info(f"検査 {check.check} {list(check.objects)} が不合格です: "
                             f"値={report.worst_value:.3e}, 添字={report.worst_index}")
        return ReportRow(
            scenario=scenario.name,
            check=check.check,
            objects=check.objects,
            passed=report.passed,
            worst_value=report.worst_value,
            worst_index=report.worst_index,
            tol=report.tol,
            cap=scenario.cap,
            elapsed_ms=elapsed_ms,
        )

    def _pair(self, resolved: _Resolved, check: CheckSpec) -> tuple[SymVector, SymVector]:
        first = resolved.vector(check.objects[0])
        second = resolved.vector(check.objects[1]) if len(check.objects) > 1 else first
        return first, second

    def _check_coeff_criterion(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        weight = check.options.get('weight', 'corrected_j_plus_1')
        return coeff_criterion(resolved.vector(check.objects[0]), weight, resolved.scenario.tol)

    def _check_radial_sum(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        return radial_constancy(resolved.vector(check.objects[0]), resolved.scenario.tol)

    def _check_shift_gram(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        q1, q2 = self._pair(resolved, check)
        kmax = check.options.get('kmax', max(q1.effective_degree(), q2.effective_degree(), 1))
        values = np.abs(shift_gram(q1, q2, kmax, self.max_cap))
        position = int(np.argmax(values))
        tol = resolved.scenario.tol * q1.norm() * q2.norm()
        worst = float(values[position])
        return CriterionReport(worst <= tol, position + 1, worst, tol, "shift_gram")

    def _check_cross_condition(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        q1, q2 = self._pair(resolved, check)
        return cross_condition(q1, q2, resolved.scenario.tol)

    def _check_wandering_span(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        basis = [resolved.vector(reference) for reference in check.objects]
        return is_wandering_span(basis, resolved.scenario.tol)

    def _check_round_trip(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        v = resolved.vector(check.objects[0])
        residual = (reconstruct(slice_z0(v)) - v).norm()
        tol = resolved.scenario.tol * v.norm()
        return CriterionReport(residual <= tol, 0, residual, tol, "round_trip")

    def _check_dirichlet_isometry(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        f = restrict(resolved.vector(check.objects[0]))
        norm_squared = dirichlet_inner(f, f).real
        # 添字 0: 埋め込みの等長性（criterion_tol）, 添字 1: 面積分による内積との一致（isometry_tol）
        deviations = (
            abs(embed(f).norm() ** 2 - norm_squared),
            abs(dirichlet_inner_quadrature(f, f) - norm_squared),
        )
        tolerances = (resolved.scenario.tol * norm_squared, self.isometry_tol * norm_squared)
        ratios = [deviation / tol if tol > 0 else (0.0 if deviation == 0 else math.inf)
                  for deviation, tol in zip(deviations, tolerances)]
        position = int(np.argmax(ratios))
        passed = all(deviation <= tol for deviation, tol in zip(deviations, tolerances))
        return CriterionReport(passed, position, deviations[position], tolerances[position], "dirichlet_isometry")

    def _check_adjoint_relation(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        q1, q2 = self._pair(resolved, check)
        f, g = restrict(q1), restrict(q2)
        residual = adjoint_relation_residual(f, g)
        tol = resolved.scenario.tol * max(1.0, math.sqrt(f.norm_squared() * g.norm_squared()))
        return CriterionReport(residual <= tol, 0, residual, tol, "adjoint_relation")

    def _check_contains(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        model = resolved.model(check.objects[0])
        v = resolved.vector(check.objects[1])
        result = contains(model.basis, v, resolved.scenario.tol)
        return CriterionReport(result.contained, 0, result.residual, resolved.scenario.tol * v.norm(), "contains")

    def _check_invariance(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        residual = resolved.model(check.objects[0]).invariance_residual()
        tol = resolved.scenario.tol
        return CriterionReport(residual <= tol, 0, residual, tol, "invariance")

    def _check_minimality(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        report = minimality_report(resolved.frame(check.objects[0]), resolved.scenario.cap, self.guard, self.isometry_tol)
        worst = max(report.residual, report.surplus_leak)
        return CriterionReport(report.passed, report.surplus_rank, worst, report.tol, "minimality")

    def _check_orthonormal_system(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        return orthonormal_system_check(resolved.frame(check.objects[0]), self.isometry_tol)

    def _residual_report(self, residual: float, name: str) -> CriterionReport:
        return CriterionReport(residual <= self.isometry_tol, 0, residual, self.isometry_tol, name)

    def _check_isometry(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        iso = PairedIsometry(resolved.frame(check.objects[0]), resolved.frame(check.objects[1]))
        residual = isometry_residual(iso, self.sample_points(resolved.scenario), self.isometry_tol,
                                     self.probe_count, self.probe_seed)
        return self._residual_report(residual, "isometry")

    def _check_intertwiner(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        iso = PairedIsometry(resolved.frame(check.objects[0]), resolved.frame(check.objects[1]))
        if 'u' in check.options:
            try:
                unitary = parse_matrix(check.options['u'])
            except ValidationError as e:
                raise PremiseViolated('unitary', str(e)) from e
        else:
            unitary = np.eye(iso.rank, dtype=np.complex128)
        residual = intertwiner_check(iso, unitary, self.sample_points(resolved.scenario), self.isometry_tol,
                                     self.probe_count, self.probe_seed)
        return self._residual_report(residual, "intertwiner")

    def _check_factorization(self, resolved: _Resolved, check: CheckSpec) -> CriterionReport:
        names = check.objects
        frames = [resolved.frame(name) for name in names]
        models = (resolved.model(names[0]), resolved.model(names[1]), resolved.model(names[2]))
        ln_phases = tuple(-1.0 + 0j for _ in range(frames[1].rank)) if check.options.get('flip', False) else ()
        residual = factorization_residual(
            frames[0], frames[1], frames[2], self.sample_points(resolved.scenario),
            ln_phases=ln_phases, models=models, tol=self.isometry_tol,
            probe_count=self.probe_count, probe_seed=self.probe_seed,
        )
        return self._residual_report(residual, "factorization")

    def convergence(self, spec: SubspaceSpec, vectors: dict[str, SymVector], caps: Sequence[int],
                    check: str = 'radial_sum') -> ConvergenceResult:
        """
        打ち切り次数を変えてモデルを作り直し、残差の推移を調べる

        Args:
            spec: 部分空間の指定（生成元または零点）
            vectors: 生成元の名前から SymVector への対応
            caps: 狭義単調増加の打ち切り次数の列
            check: CONVERGENCE_CHECKS のいずれか。truncation_gap は cap と 2*cap の遊走部分空間の距離

        Returns:
            ConvergenceResult（残差が 10% の余裕を含めて非増加なら monotone）

        Raises:
            ValidationError: caps、check、部分空間の指定のいずれかが不正な場合
        """
        if not caps:
            raise ValidationError("caps が空です")
        if any(cap < 1 for cap in caps) or any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValidationError(f"caps は狭義単調増加の正の整数でなければなりません: {list(caps)}")
        if check not in CONVERGENCE_CHECKS:
            raise ValidationError(f"収束調査に使えない検査です: {check}")
        validate_subspace(spec.name, spec, caps[0], vectors)
        for name in spec.generators:
            degree = vectors[name].effective_degree(self.degree_tol)
            if degree > caps[0]:
                raise ValidationError(f"生成元 {name} の次数 {degree} が cap {caps[0]} を超えています")

        rows = []
        for cap in caps:
            model = self.build_model(spec, vectors, cap)
            residual = self._convergence_residual(model, check, spec, vectors)
            self.logger.info(f"収束調査: cap={cap}, {check} の残差={residual:.3e}")
            rows.append(ConvergenceRow(cap, residual))

        monotone = all(
            later.residual <= CONVERGENCE_SLACK * earlier.residual + CONVERGENCE_FLOOR
            for earlier, later in zip(rows, rows[1:])
        )
        if not monotone:
            self.logger.warning(f"残差が単調に減少していません: {[row.residual for row in rows]}")
        return ConvergenceResult(check, tuple(rows), monotone)

    def _convergence_residual(self, model: InvariantModel, check: str, spec: SubspaceSpec,
                              vectors: dict[str, SymVector]) -> float:
        if check == 'invariance':
            return model.invariance_residual()
        if check == 'beurling':
            return beurling_residual(model, degree_tol=self.degree_tol)
        frame = wandering_of(model)
        if frame.rank == 0:
            raise EmptySpan(f"cap={model.cap} で遊走部分空間が空です")
        if check == 'truncation_gap':
            fine = wandering_of(self.build_model(spec, vectors, 2 * model.cap))
            return truncation_gap(frame, fine)
        if check == 'radial_sum':
            return radial_constancy(frame.vectors[0], self.criterion_tol).worst_value
        if check == 'orthonormal_system':
            return orthonormal_system_check(frame, self.isometry_tol).worst_value
        report = minimality_report(frame, model.cap, self.guard, self.isometry_tol)
        return max(report.residual, report.surplus_leak)

    def oracle(self, q: SymVector, kmax: int) -> list[OracleRow]:
        """
        c_{-k}（動径和）、重み j+1 と j の係数和、T_z シフトの Gram 値を並べる

        Raises:
            ValidationError: kmax が正でない場合
            CapExceeded: kmax + deg(q) が max_cap を超える場合
        """
        if kmax < 1:
            raise ValidationError(f"kmax は正の整数でなければなりません: {kmax}")

        series = radial_sum(q)
        corrected = np.pad(criterion_sums(q, 'corrected_j_plus_1'), (0, max(0, kmax - q.deg)))
        weight_j = np.pad(criterion_sums(q, 'paper_j'), (0, max(0, kmax - q.deg)))
        gram = shift_gram(q, q, kmax, self.max_cap)
        tol = self.criterion_tol * q.norm() ** 2

        rows = []
        for k in range(1, kmax + 1):
            radial = series.coefficient(-k)
            reference = complex(corrected[k - 1])
            rows.append(OracleRow(
                k=k,
                radial=radial,
                corrected=reference,
                weight_j=complex(weight_j[k - 1]),
                gram=complex(gram[k - 1]),
                corrected_agrees=bool(abs(radial - reference) <= tol and abs(gram[k - 1] - reference) <= tol),
                weight_j_agrees=bool(abs(weight_j[k - 1] - reference) <= tol),
            ))

        disagreements = [row.k for row in rows if not row.weight_j_agrees]
        if disagreements:
            self.logger.info(f"重み j の係数和が他の量と一致しない k: {disagreements}")
        return rows

    def render_report(self, rows: list[ReportRow]) -> str:
        return render_rows(rows, self.report_format, self.stable)

    @staticmethod
    def render_convergence(result: ConvergenceResult) -> str:
        return render_table(('cap', 'residual'), [(row.cap, format_float(row.residual)) for row in result.rows])

    @staticmethod
    def render_oracle(rows: list[OracleRow]) -> str:
        table = [
            (row.k, format_complex(row.radial), format_complex(row.corrected), format_complex(row.weight_j),
             format_complex(row.gram), 'true' if row.corrected_agrees else 'false',
             'true' if row.weight_j_agrees else 'false')
            for row in rows
        ]
        return render_table(ORACLE_COLUMNS, table)

    def write_output(self, text: str, out: str | Path | None = None) -> None:
        """out が指定されればファイルへ、なければ標準出力へ書き出す"""
        if out is None:
            sys.stdout.write(text)
            return
        output_path = Path(out)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(text, encoding='utf-8')
        self.logger.info(f"レポートを書き出しました: {output_path}")

    @staticmethod
    def exit_code(rows: list[ReportRow]) -> int:
        return 0 if all(row.passed for row in rows) else 1

    def print_summary(self, rows: list[ReportRow]) -> None:
        """検査結果のサマリを標準エラーに出力（標準出力はレポート用）"""
        passed = sum(1 for row in rows if row.passed)
        failed = len(rows) - passed

        print("\n" + "-" * 60, file=sys.stderr)
        print("合計:", file=sys.stderr)
        print(f"  検査数: {len(rows)}", file=sys.stderr)
        print(f"  合格: {passed}", file=sys.stderr)
        print(f"  不合格: {failed}", file=sys.stderr)
        for row in rows:
            if not row.passed:
                print(f"    {row.check} ({';'.join(row.objects)}): 値={format_float(row.worst_value)}", file=sys.stderr)
        print("=" * 60, file=sys.stderr)
