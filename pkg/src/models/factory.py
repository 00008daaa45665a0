from typing import Any, Mapping, Optional, Union

from src.core.errors import ConfigError
from src.models.detection import (AlwaysDetectModel, DetectionModel, GhzContextualModel,
                                  SingletReferenceModel, TableModel)
from src.models.scripted import ScriptedModelLoader

STANDARD_GHZ_PARITIES = {"XXX": 1, "XYY": -1, "YXY": -1, "YYX": -1}

BUILTIN_MODELS = {
    SingletReferenceModel.name: SingletReferenceModel,
    AlwaysDetectModel.name: AlwaysDetectModel,
    GhzContextualModel.name: GhzContextualModel,
}


def create_model(spec: Union[str, Mapping[str, Any]],
                 context_parities: Optional[Mapping[str, int]] = None,
                 scripts_dir: Optional[str] = None) -> DetectionModel:
    """Build a detection model from its config form.

    spec is a built-in name, {"table": {...}} for an inline table model or
    {"script": "file.lua"} for a Lua-scripted one.
    """
    if isinstance(spec, str):
        if spec not in BUILTIN_MODELS:
            raise ConfigError(f"unknown model {spec!r}; built-in models: {sorted(BUILTIN_MODELS)}")
        if spec == GhzContextualModel.name:
            return GhzContextualModel(context_parities or STANDARD_GHZ_PARITIES)
        return BUILTIN_MODELS[spec]()

    if isinstance(spec, Mapping):
        if "table" in spec:
            return TableModel(spec["table"])
        if "script" in spec:
            if scripts_dir is None:
                raise ConfigError("scripted models need a models directory")
            return ScriptedModelLoader(scripts_dir).load(str(spec["script"]))

    raise ConfigError(f"model must be a name, a table or a script, got {spec!r}")
