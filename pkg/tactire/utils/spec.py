from functools import partial
import importlib
from typing import Any, Callable, Dict, Tuple, TypedDict, Union

from tactire.utils.config_utils import ConfigSchemaError

SPEC_KEYS = {"module", "name", "args", "kwargs"}


class ModuleSpec(TypedDict):
    """A scene generator named by import path, with bound args and kwargs.

    Experiment configs hold one of these so the generator stays JSON-serializable
    and its arguments can be overridden from the command line or an experiment
    file:

        >>> spec = ModuleSpec.create(height_scenes, n_short=43, n_tall=12)
        >>> spec = ModuleSpec.create(
        ...     "tactire.sim.experiments:height_scenes", n_short=43, n_tall=12
        ... )
        >>> scenes = ModuleSpec.instantiate(spec)(seed=3)
    """

    module: str
    name: str
    args: Tuple[Any, ...]
    kwargs: Dict[str, Any]

    @staticmethod
    def create(  # type: ignore
        target: Union[str, Callable], *args, **kwargs
    ) -> "ModuleSpec":
        if isinstance(target, str):
            module, sep, name = target.partition(":")
            if not sep or not module or not name or ":" in name:
                raise ConfigSchemaError(
                    f"expected 'package.module:generator', got {target!r}", "scenes"
                )
        else:
            module = getattr(target, "__module__", None)
            name = getattr(target, "__name__", None)
            if module is None or name is None:
                raise ConfigSchemaError(
                    f"{target!r} has no import path; pass 'package.module:generator'",
                    "scenes",
                )
        return ModuleSpec(module=module, name=name, args=args, kwargs=kwargs)

    @staticmethod
    def instantiate(spec: "ModuleSpec") -> Callable:  # type: ignore
        """The named callable with the spec's arguments bound."""
        if set(spec) != SPEC_KEYS:
            raise ConfigSchemaError(
                f"scene spec needs keys {sorted(SPEC_KEYS)}, got {sorted(spec)}",
                "scenes",
            )
        try:
            fn = getattr(importlib.import_module(spec["module"]), spec["name"])
        except (ImportError, AttributeError) as e:
            raise ConfigSchemaError(
                f"cannot import {spec['module']}:{spec['name']}", "scenes"
            ) from e
        if not callable(fn):
            raise ConfigSchemaError(
                f"{spec['module']}:{spec['name']} is not callable", "scenes"
            )
        return partial(fn, *spec["args"], **spec["kwargs"])
