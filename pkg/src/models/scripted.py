from lupa import LuaRuntime
import logging
from typing import Any
from pathlib import Path

from src.core.errors import ConfigError, ModelError
from src.models.detection import TableModel


class ScriptedModelLoader:
    """Loads table detection models written as Lua scripts.

    A script returns one table with the same shape as an inline JSON table
    definition (name, parties, microstates).
    """

    def __init__(self, models_dir: str):
        self.logger = logging.getLogger("SRLab.Models")
        self.models_dir = Path(models_dir)
        self.lua = LuaRuntime(unpack_returned_tuples=True)
        self._lua_type = self.lua.eval("type")

    def load(self, script_name: str) -> TableModel:
        """Run a model script and build the table model it returns"""
        script_path = Path(script_name)
        if not script_path.suffix:
            script_path = script_path.with_suffix(".lua")
        if not script_path.is_absolute():
            script_path = self.models_dir / script_path

        try:
            with open(script_path, 'r', encoding='utf-8') as f:
                script_code = f.read()
        except FileNotFoundError as e:
            self.logger.error(f"Model script not found: {e}")
            raise ConfigError(f"model script not found: {script_path}") from e

        try:
            lua_table = self.lua.execute(script_code)
        except Exception as e:
            self.logger.error(f"Model script failed: {script_path}: {e}")
            raise ModelError(f"{script_path}: {e}") from e

        if self._lua_type(lua_table) != "table":
            raise ModelError(f"{script_path}: script must return a table")

        definition = self._convert_lua_value(lua_table)
        definition.setdefault("name", script_path.stem)
        self.logger.info(f"Scripted model loaded: {definition['name']}")
        return TableModel(definition)

    def _convert_lua_value(self, value: Any) -> Any:
        """Lua tables become lists (1..n keys) or dicts, recursively"""
        if self._lua_type(value) != "table":
            return value

        items = list(value.items())
        keys = [k for k, _ in items]
        if keys and keys == list(range(1, len(keys) + 1)):
            return [self._convert_lua_value(v) for _, v in items]
        return {str(k): self._convert_lua_value(v) for k, v in items}
