from typing import Any


class WorkbenchError(Exception):
    """ワークベンチ全体の基底例外"""


class CapExceeded(WorkbenchError):
    """次数上限を超える操作が要求された"""

    def __init__(self, degree: int, cap: int):
        self.degree = degree
        self.cap = cap
        super().__init__(f"次数 {degree} が上限 {cap} を超えています")


class NotSymmetric(WorkbenchError):
    """係数グリッドの反対角線が一定でない"""


class EmptySpan(WorkbenchError):
    """許容誤差を超える方向が一つも残らなかった"""


class PremiseViolated(WorkbenchError):
    """前提条件の検査に失敗した"""

    def __init__(self, check: str, detail: str = "", report: Any = None):
        self.check = check
        self.detail = detail
        self.report = report
        message = f"前提条件 {check} を満たしていません"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class RankMismatch(WorkbenchError):
    """フレームまたは係数の次元が一致しない"""


class ChainBroken(WorkbenchError):
    """不変部分空間の包含関係が成り立たない"""


class ScenarioError(WorkbenchError):
    """シナリオ入力の誤り（終了コード 2）"""


class ParseError(ScenarioError):
    """シナリオファイルを解析できない"""


class ValidationError(ScenarioError):
    """シナリオの内容が不正"""
