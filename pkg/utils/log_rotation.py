import configparser
import logging
import os
import re
from datetime import datetime, timedelta
from logging.handlers import TimedRotatingFileHandler

from utils.config_manager import get_config_value, load_config

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DEBUG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'


def _resolve_log_directory(config: configparser.ConfigParser) -> str:
    log_directory = str(get_config_value(config, 'LOGGING', 'log_directory', 'logs'))
    if os.path.isabs(log_directory):
        return log_directory
    return os.path.join(os.path.dirname(os.path.dirname(__file__)), log_directory)


def _rotating_handler(log_file: str, retention_days: int) -> TimedRotatingFileHandler:
    handler = TimedRotatingFileHandler(log_file, when='midnight', backupCount=retention_days, encoding='utf-8')
    handler.suffix = "%Y-%m-%d.log"
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    return handler


def _stderr_handler() -> logging.StreamHandler:
    # 標準出力はレポート専用
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.setLevel(logging.WARNING)
    return handler


def setup_logging(config: configparser.ConfigParser | None = None) -> None:
    """ルートロガーに日次ローテーションのファイル出力と標準エラー出力を設定する

    Raises:
        PermissionError: ログディレクトリを作成できない場合
    """
    config = config if config is not None else load_config()

    try:
        log_directory = _resolve_log_directory(config)
        retention_days = int(get_config_value(config, 'LOGGING', 'log_retention_days', 7))
        project_name = str(get_config_value(config, 'LOGGING', 'project_name', 'Pybergman'))
        level_name = str(get_config_value(config, 'LOGGING', 'log_level', 'INFO')).upper()

        os.makedirs(log_directory, exist_ok=True)
        log_file = os.path.join(log_directory, f'{project_name}.log')

        root_logger = logging.getLogger()
        level = logging.getLevelName(level_name)
        root_logger.setLevel(level if isinstance(level, int) else logging.INFO)
        root_logger.addHandler(_rotating_handler(log_file, retention_days))
        root_logger.addHandler(_stderr_handler())
        if not isinstance(level, int):
            logging.warning(f"無効なログレベル '{level_name}' が指定されました。INFOを使用します。")

        cleanup_old_logs(log_directory, retention_days, project_name)
        logging.info(f"ログを {log_file} に出力します")

    except PermissionError as e:
        raise PermissionError(f"ログディレクトリの作成権限がありません: {e}")
    except Exception as e:
        raise Exception(f"ログ設定の初期化中にエラーが発生しました: {e}")


def cleanup_old_logs(log_directory: str, retention_days: int, project_name: str) -> None:
    """保持日数を過ぎた project_name のローテーション済みログを削除する"""
    pattern = re.compile(rf'{re.escape(project_name)}\.log\.\d{{4}}-\d{{2}}-\d{{2}}\.log$')
    cutoff = datetime.now() - timedelta(days=retention_days)

    try:
        stale = [
            filename for filename in os.listdir(log_directory)
            if pattern.match(filename)
            and datetime.fromtimestamp(os.path.getmtime(os.path.join(log_directory, filename))) <= cutoff
        ]
    except OSError as e:
        logging.error(f"ログディレクトリを読み取れません {log_directory}: {e}")
        return

    removed = 0
    for filename in stale:
        try:
            os.remove(os.path.join(log_directory, filename))
            removed += 1
        except OSError as e:
            logging.error(f"ログファイルの削除中にエラーが発生しました {filename}: {e}")

    if removed:
        logging.info(f"古いログファイルを {removed} 個削除しました")


def setup_debug_logging(config: configparser.ConfigParser | None = None) -> logging.Logger | None:
    """debug_mode が有効なら service 配下の DEBUG ログ（ランク、残差）を debug.log に出す"""
    config = config if config is not None else load_config()
    if not bool(get_config_value(config, 'LOGGING', 'debug_mode', False)):
        return None

    try:
        log_directory = _resolve_log_directory(config)
        os.makedirs(log_directory, exist_ok=True)
        debug_log_path = os.path.join(log_directory, 'debug.log')

        handler = logging.FileHandler(debug_log_path, encoding='utf-8')
        handler.setFormatter(logging.Formatter(DEBUG_FORMAT))
        debug_logger = logging.getLogger('service')
        debug_logger.setLevel(logging.DEBUG)
        debug_logger.addHandler(handler)
    except OSError as e:
        logging.error(f"デバッグログ設定中にエラーが発生しました: {e}")
        return None

    logging.info(f"デバッグログが有効化されました: {debug_log_path}")
    return debug_logger
