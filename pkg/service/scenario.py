"""シナリオファイルの読み込みとレポートの出力"""
import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from service.bidisc import BergmanPoly, BidiscPoly, SymVector, project_sym, to_sym
from service.exceptions import ParseError, ValidationError

logger = logging.getLogger(__name__)

WANDERING_PREFIX = 'wandering:'

REPORT_COLUMNS = ('scenario', 'check', 'objects', 'passed', 'worst_value', 'worst_index', 'tol', 'cap', 'elapsed_ms')

# 検査名 -> 参照する対象の種類（'vectors' は一本以上の可変長）
CHECK_SIGNATURES: dict[str, tuple[str, ...]] = {
    'coeff_criterion': ('vector',),
    'radial_sum': ('vector',),
    'shift_gram': ('vector', 'vector'),
    'cross_condition': ('vector', 'vector'),
    'wandering_span': ('vectors',),
    'round_trip': ('vector',),
    'dirichlet_isometry': ('vector',),
    'adjoint_relation': ('vector', 'vector'),
    'contains': ('subspace', 'vector'),
    'invariance': ('subspace',),
    'minimality': ('subspace',),
    'orthonormal_system': ('subspace',),
    'isometry': ('subspace', 'subspace'),
    'intertwiner': ('subspace', 'subspace'),
    'factorization': ('subspace', 'subspace', 'subspace'),
}


@dataclass(frozen=True)
class SubspaceSpec:
    name: str
    generators: tuple[str, ...] = ()
    zeros: tuple[complex, ...] | None = None

    @property
    def is_zero_set(self) -> bool:
        return self.zeros is not None


@dataclass(frozen=True)
class CheckSpec:
    check: str
    objects: tuple[str, ...]
    options: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    cap: int
    tol: float
    samples: int
    vectors: dict[str, SymVector]
    subspaces: dict[str, SubspaceSpec]
    checks: tuple[CheckSpec, ...]

    def with_overrides(self, cap: int | None = None, tol: float | None = None,
                       samples: int | None = None) -> 'Scenario':
        """コマンドライン引数で上書きしたシナリオ（再検証する）"""
        updated = replace(
            self,
            cap=self.cap if cap is None else cap,
            tol=self.tol if tol is None else tol,
            samples=self.samples if samples is None else samples,
        )
        validate_scenario(updated)
        return updated


@dataclass(frozen=True)
class ReportRow:
    scenario: str
    check: str
    objects: tuple[str, ...]
    passed: bool
    worst_value: float
    worst_index: int
    tol: float
    cap: int
    elapsed_ms: float = 0.0

    def to_record(self, stable: bool = False, textual: bool = True) -> dict[str, Any]:
        """CSV 用（textual=True）または JSON 用の辞書"""
        record = asdict(self)
        record['objects'] = ';'.join(self.objects)
        if stable:
            record['elapsed_ms'] = 0.0
        if textual:
            record['passed'] = 'true' if self.passed else 'false'
            for key in ('worst_value', 'tol', 'elapsed_ms'):
                record[key] = format_float(record[key])
        else:
            for key in ('worst_value', 'tol', 'elapsed_ms'):
                if not math.isfinite(record[key]):
                    record[key] = format_float(record[key])
        return record


def format_float(value: float) -> str:
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return f"{value:.17g}"


def format_complex(value: complex) -> str:
    return f"{format_float(value.real)}{'+' if value.imag >= 0 else '-'}{format_float(abs(value.imag))}j"


def _require(condition: bool, message: str):
    if not condition:
        raise ValidationError(message)


def _number(record: dict, key: str, context: str) -> float:
    value = record.get(key, 0.0)
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"{context}: {key} は数値でなければなりません")
    return float(value)


def _complex(record: Any, context: str) -> complex:
    _require(isinstance(record, dict), f"{context}: 複素数は {{re, im}} で指定してください")
    return complex(_number(record, 're', context), _number(record, 'im', context))


def _index(value: Any, context: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool) and value >= 0,
             f"{context}: index は非負整数でなければなりません")
    return value


def parse_vector(name: str, records: Any) -> SymVector:
    """
    係数レコードの列を SymVector にする

    basis は monomial_zw（index [m, n]）、sym_e（index n）、bergman_z（index n）のいずれか。
    monomial_zw の部分は対称でなければならない。
    """
    _require(isinstance(records, list) and len(records) > 0, f"ベクトル {name}: 係数レコードが空です")

    monomials: dict[tuple[int, int], complex] = {}
    sym: dict[int, complex] = {}
    bergman: dict[int, complex] = {}
    for position, record in enumerate(records):
        context = f"ベクトル {name} のレコード {position}"
        _require(isinstance(record, dict), f"{context}: オブジェクトではありません")
        amplitude = _complex(record, context)
        basis = record.get('basis')
        index = record.get('index')
        if basis == 'monomial_zw':
            _require(isinstance(index, list) and len(index) == 2, f"{context}: index は [m, n] で指定してください")
            key = (_index(index[0], context), _index(index[1], context))
            monomials[key] = monomials.get(key, 0j) + amplitude
        elif basis == 'sym_e':
            key = _index(index, context)
            sym[key] = sym.get(key, 0j) + amplitude
        elif basis == 'bergman_z':
            key = _index(index, context)
            bergman[key] = bergman.get(key, 0j) + amplitude
        else:
            raise ValidationError(f"{context}: 不明な basis です: {basis}")

    parts: list[SymVector] = []
    if monomials:
        poly = BidiscPoly.from_terms(monomials)
        _require(poly.is_symmetric(), f"ベクトル {name}: monomial_zw の係数が対称ではありません")
        parts.append(project_sym(poly))
    if sym:
        coords = np.zeros(max(sym) + 1, dtype=np.complex128)
        for n, amplitude in sym.items():
            coords[n] = amplitude
        parts.append(SymVector(coords))
    if bergman:
        coeffs = np.zeros(max(bergman) + 1, dtype=np.complex128)
        for n, amplitude in bergman.items():
            coeffs[n] = amplitude
        parts.append(to_sym(BergmanPoly(coeffs)))

    vector = parts[0]
    for part in parts[1:]:
        vector = vector + part
    return vector


def _parse_subspace(name: str, record: Any) -> SubspaceSpec:
    _require(isinstance(record, dict), f"部分空間 {name}: オブジェクトではありません")
    if 'zeros' in record:
        zeros = record['zeros']
        _require(isinstance(zeros, list), f"部分空間 {name}: zeros はリストで指定してください")
        return SubspaceSpec(name, zeros=tuple(_complex(zero, f"部分空間 {name}") for zero in zeros))
    generators = record.get('generators')
    _require(isinstance(generators, list) and len(generators) > 0
             and all(isinstance(item, str) for item in generators),
             f"部分空間 {name}: generators か zeros を指定してください")
    return SubspaceSpec(name, generators=tuple(generators))


def _parse_check(position: int, record: Any) -> CheckSpec:
    context = f"検査 {position}"
    _require(isinstance(record, dict), f"{context}: オブジェクトではありません")
    check = record.get('check')
    _require(isinstance(check, str) and check in CHECK_SIGNATURES, f"{context}: 不明な検査です: {check}")
    objects = record.get('objects', [])
    _require(isinstance(objects, list) and all(isinstance(item, str) for item in objects),
             f"{context}: objects は名前のリストで指定してください")
    options = record.get('options', {})
    _require(isinstance(options, dict), f"{context}: options はオブジェクトで指定してください")
    return CheckSpec(check, tuple(objects), dict(options))


def _positive_int(data: dict, key: str, default: int) -> int:
    value = data.get(key, default)
    _require(isinstance(value, int) and not isinstance(value, bool) and value >= 0,
             f"{key} は非負整数でなければなりません: {value}")
    return value


def parse_scenario(data: Any, default_name: str = 'scenario', cap: int = 40,
                   tol: float = 1e-10, samples: int = 0) -> Scenario:
    """
    JSON から読み込んだ辞書を Scenario にする

    Args:
        data: シナリオの辞書
        default_name: name が無いときの名前
        cap, tol, samples: シナリオに指定が無いときの既定値

    Raises:
        ValidationError: 内容が不正な場合
    """
    _require(isinstance(data, dict), "シナリオのトップレベルはオブジェクトでなければなりません")

    name = data.get('name', default_name)
    _require(isinstance(name, str), "name は文字列でなければなりません")
    scenario_tol = data.get('tol', tol)
    _require(isinstance(scenario_tol, (int, float)) and not isinstance(scenario_tol, bool) and scenario_tol > 0,
             f"tol は正の数でなければなりません: {scenario_tol}")

    vectors_data = data.get('vectors', {})
    subspaces_data = data.get('subspaces', {})
    checks_data = data.get('checks', [])
    _require(isinstance(vectors_data, dict), "vectors はオブジェクトで指定してください")
    _require(isinstance(subspaces_data, dict), "subspaces はオブジェクトで指定してください")
    _require(isinstance(checks_data, list), "checks はリストで指定してください")

    scenario = Scenario(
        name=name,
        cap=_positive_int(data, 'cap', cap),
        tol=float(scenario_tol),
        samples=_positive_int(data, 'samples', samples),
        vectors={key: parse_vector(key, value) for key, value in vectors_data.items()},
        subspaces={key: _parse_subspace(key, value) for key, value in subspaces_data.items()},
        checks=tuple(_parse_check(position, record) for position, record in enumerate(checks_data)),
    )
    validate_scenario(scenario)
    return scenario


def _resolves_vector(scenario: Scenario, reference: str) -> bool:
    if reference.startswith(WANDERING_PREFIX):
        return reference[len(WANDERING_PREFIX):] in scenario.subspaces
    return reference in scenario.vectors


def validate_subspace(name: str, spec: SubspaceSpec, cap: int, vectors: dict[str, SymVector] | None = None):
    """生成元の参照と、零点が単位円板の内部にあり個数が cap 以下であることを検査する"""
    if vectors is not None:
        for generator in spec.generators:
            _require(generator in vectors, f"部分空間 {name}: 未定義のベクトル {generator} を参照しています")
    if spec.zeros is not None:
        _require(all(abs(zero) < 1.0 for zero in spec.zeros), f"部分空間 {name}: 零点は単位円板の内部に置いてください")
        _require(len(spec.zeros) <= cap, f"部分空間 {name}: 零点の個数 {len(spec.zeros)} が cap {cap} を超えています")


def validate_scenario(scenario: Scenario):
    """名前の参照と次数上限を検査する"""
    for name, vector in scenario.vectors.items():
        degree = vector.effective_degree()
        if degree > scenario.cap:
            raise ValidationError(f"ベクトル {name} の次数 {degree} が cap {scenario.cap} を超えています")

    for name, spec in scenario.subspaces.items():
        validate_subspace(name, spec, scenario.cap, scenario.vectors)

    for position, check in enumerate(scenario.checks):
        signature = CHECK_SIGNATURES[check.check]
        if signature == ('vectors',):
            _require(len(check.objects) >= 1, f"検査 {position} ({check.check}): 対象が空です")
            kinds = ('vector',) * len(check.objects)
        else:
            minimum = len(signature) - (1 if check.check == 'shift_gram' else 0)
            _require(minimum <= len(check.objects) <= len(signature),
                     f"検査 {position} ({check.check}): 対象の個数が不正です: {len(check.objects)}")
            kinds = signature[:len(check.objects)]
        for kind, reference in zip(kinds, check.objects):
            if kind == 'vector':
                _require(_resolves_vector(scenario, reference),
                         f"検査 {position} ({check.check}): 未定義のベクトル {reference} を参照しています")
            else:
                _require(reference in scenario.subspaces,
                         f"検査 {position} ({check.check}): 未定義の部分空間 {reference} を参照しています")
        _validate_options(position, check)


def _validate_options(position: int, check: CheckSpec):
    context = f"検査 {position} ({check.check})"
    options = check.options
    if 'weight' in options:
        _require(options['weight'] in ('paper_j', 'corrected_j_plus_1'), f"{context}: 不明な weight です: {options['weight']}")
    if 'kmax' in options:
        kmax = options['kmax']
        _require(isinstance(kmax, int) and not isinstance(kmax, bool) and kmax >= 1,
                 f"{context}: kmax は正の整数でなければなりません")
    if 'flip' in options:
        _require(isinstance(options['flip'], bool), f"{context}: flip は真偽値でなければなりません")
    if 'u' in options:
        _require(isinstance(options['u'], list) and all(isinstance(row, list) for row in options['u']),
                 f"{context}: u は {{re, im}} の二重リストで指定してください")


def parse_matrix(rows: list[list[Any]]) -> np.ndarray:
    """{re, im} の二重リストを複素行列にする"""
    return np.array([[_complex(entry, 'u') for entry in row] for row in rows], dtype=np.complex128)


def load_scenario(path: str | Path, cap: int = 40, tol: float = 1e-10, samples: int = 0) -> Scenario:
    """
    シナリオファイルを読み込む

    Raises:
        ParseError: ファイルを読めない、または JSON として解析できない場合
        ValidationError: 内容が不正な場合
    """
    scenario_path = Path(path)
    try:
        text = scenario_path.read_text(encoding='utf-8')
    except OSError as e:
        raise ParseError(f"シナリオファイルを読み込めません: {scenario_path} - {e}") from e

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"シナリオファイルの解析に失敗しました: {scenario_path} - {e}") from e

    scenario = parse_scenario(data, scenario_path.stem, cap, tol, samples)
    logger.info(f"シナリオを読み込みました: {scenario.name} (検査 {len(scenario.checks)} 件)")
    return scenario


def render_rows(rows: list[ReportRow], fmt: str = 'csv', stable: bool = False) -> str:
    """レポート行を CSV または JSON Lines の文字列にする"""
    if fmt == 'jsonl':
        return ''.join(json.dumps(row.to_record(stable, textual=False), ensure_ascii=False) + '\n' for row in rows)
    if fmt != 'csv':
        raise ValueError(f"不明な出力形式です: {fmt}")

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=REPORT_COLUMNS, lineterminator='\n')
    writer.writeheader()
    writer.writerows(row.to_record(stable) for row in rows)
    return buffer.getvalue()


def render_table(columns: tuple[str, ...], rows: list[tuple[Any, ...]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()
