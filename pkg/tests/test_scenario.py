import json
import math

import numpy as np
import pytest

from service.exceptions import ParseError, ValidationError
from service.scenario import (
    REPORT_COLUMNS,
    ReportRow,
    format_complex,
    format_float,
    load_scenario,
    parse_matrix,
    parse_scenario,
    parse_vector,
    render_rows,
)


def sym_e(n: int, re: float = 1.0, im: float = 0.0) -> dict:
    return {'basis': 'sym_e', 'index': n, 're': re, 'im': im}


@pytest.fixture
def basic_data():
    """e_1 と零点 1/2 の部分空間を持つシナリオ"""
    return {
        'name': 'basic',
        'vectors': {'q': [sym_e(1)]},
        'subspaces': {'half': {'zeros': [{'re': 0.5, 'im': 0.0}]}},
        'checks': [
            {'check': 'radial_sum', 'objects': ['q']},
            {'check': 'contains', 'objects': ['half', 'wandering:half']},
        ],
    }


@pytest.fixture
def sample_row():
    return ReportRow('basic', 'radial_sum', ('q',), True, 0.25, 1, 1e-10, 40, 3.5)


class TestParseVector:
    """係数レコードの解析に関するテスト"""

    def test_symmetric_monomials(self):
        """z + w が p_1 = sqrt(2) e_1 になることを確認"""
        vector = parse_vector('p1', [
            {'basis': 'monomial_zw', 'index': [1, 0], 're': 1.0},
            {'basis': 'monomial_zw', 'index': [0, 1], 're': 1.0},
        ])
        np.testing.assert_allclose(vector.coords, [0.0, math.sqrt(2)])

    def test_asymmetric_monomials(self):
        """対称でない monomial_zw で ValidationError になることを確認"""
        with pytest.raises(ValidationError):
            parse_vector('z', [{'basis': 'monomial_zw', 'index': [1, 0], 're': 1.0}])

    def test_parts_are_summed(self):
        """sym_e と bergman_z の部分が足し合わされることを確認"""
        vector = parse_vector('q', [sym_e(1), {'basis': 'bergman_z', 'index': 1, 're': math.sqrt(2)}])
        np.testing.assert_allclose(vector.coords, [0.0, 2.0])

    def test_repeated_index(self):
        """同じ添字のレコードが加算されることを確認"""
        vector = parse_vector('q', [sym_e(0, 1.0), sym_e(0, 0.0, 2.0)])
        np.testing.assert_allclose(vector.coords, [1.0 + 2.0j])

    @pytest.mark.parametrize('records', [
        [],
        [{'basis': 'other', 'index': 0, 're': 1.0}],
        [{'basis': 'sym_e', 'index': -1, 're': 1.0}],
        [{'basis': 'sym_e', 'index': 0, 're': 'one'}],
        [{'basis': 'monomial_zw', 'index': 2, 're': 1.0}],
        ['sym_e'],
    ])
    def test_invalid_records(self, records):
        """不正なレコードで ValidationError になることを確認"""
        with pytest.raises(ValidationError):
            parse_vector('q', records)


class TestParseScenario:
    """シナリオの解析と検証に関するテスト"""

    def test_basic(self, basic_data):
        """名前、既定値、検査の並びが読み込まれることを確認"""
        scenario = parse_scenario(basic_data)
        assert scenario.name == 'basic'
        assert scenario.cap == 40
        assert scenario.tol == 1e-10
        assert [check.check for check in scenario.checks] == ['radial_sum', 'contains']
        assert scenario.subspaces['half'].zeros == (0.5 + 0j,)

    def test_default_name(self, basic_data):
        """name が無い場合に既定の名前を使うことを確認"""
        del basic_data['name']
        assert parse_scenario(basic_data, default_name='chain').name == 'chain'

    def test_not_object(self):
        """トップレベルがオブジェクトでない場合 ValidationError になることを確認"""
        with pytest.raises(ValidationError):
            parse_scenario([1, 2])

    def test_undefined_vector(self, basic_data):
        """未定義のベクトルを参照すると ValidationError になることを確認"""
        basic_data['checks'].append({'check': 'radial_sum', 'objects': ['missing']})
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    def test_undefined_wandering(self, basic_data):
        """未定義の部分空間の遊走ベクトルを参照すると ValidationError になることを確認"""
        basic_data['checks'].append({'check': 'radial_sum', 'objects': ['wandering:other']})
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    @pytest.mark.parametrize('name', ['unknown', ['radial_sum'], None])
    def test_unknown_check(self, basic_data, name):
        """不明な検査名で ValidationError になることを確認"""
        basic_data['checks'].append({'check': name, 'objects': ['q']})
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    def test_degree_exceeds_cap(self, basic_data):
        """ベクトルの次数が cap を超えると ValidationError になることを確認"""
        basic_data['cap'] = 2
        basic_data['vectors']['high'] = [sym_e(3)]
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    def test_zero_outside_disc(self, basic_data):
        """単位円板の外の零点で ValidationError になることを確認"""
        basic_data['subspaces']['bad'] = {'zeros': [{'re': 1.0, 'im': 0.0}]}
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    def test_shift_gram_object_count(self, basic_data):
        """shift_gram は対象 1 個または 2 個だけを受け付けることを確認"""
        basic_data['checks'].append({'check': 'shift_gram', 'objects': ['q']})
        assert len(parse_scenario(basic_data).checks) == 3
        basic_data['checks'].append({'check': 'shift_gram', 'objects': ['q', 'q', 'q']})
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    def test_wandering_span_needs_objects(self, basic_data):
        """wandering_span の対象が空なら ValidationError になることを確認"""
        basic_data['checks'].append({'check': 'wandering_span', 'objects': []})
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    @pytest.mark.parametrize('options', [{'kmax': 0}, {'weight': 'j'}, {'flip': 'yes'}, {'u': 1}])
    def test_invalid_options(self, basic_data, options):
        """不正な options で ValidationError になることを確認"""
        basic_data['checks'].append({'check': 'coeff_criterion', 'objects': ['q'], 'options': options})
        with pytest.raises(ValidationError):
            parse_scenario(basic_data)

    def test_with_overrides_revalidates(self, basic_data):
        """上書きした cap で再検証されることを確認"""
        basic_data['vectors']['high'] = [sym_e(3)]
        scenario = parse_scenario(basic_data)
        assert scenario.with_overrides(cap=10).cap == 10
        with pytest.raises(ValidationError):
            scenario.with_overrides(cap=2)


class TestLoadScenario:
    """シナリオファイルの読み込みに関するテスト"""

    def test_load(self, tmp_path, basic_data):
        """ファイルから読み込めることを確認"""
        del basic_data['name']
        path = tmp_path / "chain.json"
        path.write_text(json.dumps(basic_data), encoding='utf-8')
        assert load_scenario(path).name == 'chain'

    def test_invalid_json(self, tmp_path):
        """JSON として解析できない場合 ParseError になることを確認"""
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding='utf-8')
        with pytest.raises(ParseError):
            load_scenario(path)

    def test_missing_file(self, tmp_path):
        """ファイルが無い場合 ParseError になることを確認"""
        with pytest.raises(ParseError):
            load_scenario(tmp_path / "missing.json")


class TestRendering:
    """レポート出力に関するテスト"""

    def test_format_float(self):
        """有限値は 17 桁、非有限値は文字列になることを確認"""
        assert format_float(0.0) == '0'
        assert format_float(0.1) == '0.10000000000000001'
        assert format_float(math.inf) == 'inf'
        assert format_float(-math.inf) == '-inf'
        assert format_float(math.nan) == 'nan'

    def test_format_complex(self):
        """複素数の表記を確認"""
        assert format_complex(1 - 2j) == '1-2j'
        assert format_complex(0.5j) == '0+0.5j'

    def test_csv(self, sample_row):
        """CSV のヘッダと真偽値の表記を確認"""
        lines = render_rows([sample_row]).splitlines()
        assert lines[0] == ','.join(REPORT_COLUMNS)
        assert lines[1] == 'basic,radial_sum,q,true,0.25,1,1e-10,40,3.5'

    def test_csv_stable(self, sample_row):
        """stable では elapsed_ms が 0 になることを確認"""
        lines = render_rows([sample_row], stable=True).splitlines()
        assert lines[1].endswith(',40,0')

    def test_jsonl(self, sample_row):
        """JSON Lines では数値と真偽値がそのまま出ることを確認"""
        failed = ReportRow('basic', 'intertwiner', ('a', 'b'), False, math.inf, 0, 1e-8, 40)
        records = [json.loads(line) for line in render_rows([sample_row, failed], 'jsonl').splitlines()]
        assert records[0]['passed'] is True
        assert records[0]['worst_value'] == 0.25
        assert records[1]['objects'] == 'a;b'
        assert records[1]['worst_value'] == 'inf'

    def test_unknown_format(self, sample_row):
        """不明な出力形式で ValueError になることを確認"""
        with pytest.raises(ValueError):
            render_rows([sample_row], 'xml')

    def test_parse_matrix(self):
        """{re, im} の二重リストが複素行列になることを確認"""
        matrix = parse_matrix([[{'re': 0.0, 'im': 1.0}]])
        np.testing.assert_array_equal(matrix, [[1j]])
