import configparser
import os
import sys
from typing import Any


CONFIG_PATH = os.path.join(os.path.dirname(__file__), 'config.ini')


def load_config(path: str | None = None) -> configparser.ConfigParser:
    config_path = path if path is not None else CONFIG_PATH
    config = configparser.ConfigParser()
    try:
        with open(config_path, encoding='utf-8') as f:
            config.read_file(f)
    except FileNotFoundError:
        print(f"設定ファイルが見つかりません: {config_path}", file=sys.stderr)
        raise
    except configparser.Error as e:
        print(f"設定ファイルの解析中にエラーが発生しました: {e}", file=sys.stderr)
        raise
    return config


def get_config_value(config: configparser.ConfigParser, section: str, key: str, default=None):
    if not config.has_option(section, key):
        return default

    # デフォルト値の型に応じて変換する（bool は int より先に判定）
    if isinstance(default, bool):
        return config.getboolean(section, key)
    elif isinstance(default, int):
        return config.getint(section, key)
    elif isinstance(default, float):
        return config.getfloat(section, key)
    else:
        return config.get(section, key)


def apply_overrides(config: configparser.ConfigParser, section: str, values: dict[str, Any]) -> None:
    """None 以外の値で設定を上書きする（コマンドライン引数用）"""
    if not config.has_section(section):
        config.add_section(section)

    for key, value in values.items():
        if value is None:
            continue
        config.set(section, key, str(value))
