"""
Maps provider strings → concrete classes and instantiates them.

If you add a new target chart or time stepper, just extend the *_to_class dict.
"""

from importlib import import_module
from typing    import Dict, Type, Union

from pydantic import BaseModel

from cflow.configs.base import FlowConfig, TargetConfig


# --------------------------------------------------------------------------- #
#  Helpers                                                                    #
# --------------------------------------------------------------------------- #
def _load(path: str):
    if not path:
        raise ValueError("Factory received None for implementation path. Check provider_to_class mapping.")
    mod, cls = path.rsplit(".", 1)
    return getattr(import_module(mod), cls)


def _ensure(obj: Union[Dict, BaseModel], cfg_cls: Type):
    """
    Accept either an already-built config object or a plain dict and
    return an instance of cfg_cls.
    """
    if isinstance(obj, cfg_cls):
        return obj
    if isinstance(obj, dict):
        return cfg_cls(**obj)
    raise TypeError(f"Config must be dict or {cfg_cls.__name__}, got {type(obj)}")


# --------------------------------------------------------------------------- #
#  Target factory                                                             #
# --------------------------------------------------------------------------- #
class TargetFactory:
    provider_to_class = {
        "torus": "cflow.target.torus.FlatTorus",
        "ball":  "cflow.target.ball.HyperbolicBall",
    }

    @classmethod
    def create(cls, provider: str, cfg: Union[Dict, TargetConfig]):
        impl_path = cls.provider_to_class.get(provider)
        if not impl_path:
            raise ValueError(f"Unknown target kind: {provider}")
        cfg_obj = _ensure(cfg, TargetConfig)
        return _load(impl_path)(n=cfg_obj.dim, K=cfg_obj.K, periods=cfg_obj.periods)


# --------------------------------------------------------------------------- #
#  Stepper factory                                                            #
# --------------------------------------------------------------------------- #
class StepperFactory:
    provider_to_class = {
        "euler": "cflow.flow.stepper.ExplicitEuler",
        "rk4":   "cflow.flow.stepper.RungeKutta4",
        "imex":  "cflow.flow.stepper.SpectralImex",
    }

    @classmethod
    def create(cls, provider: str, cfg: Union[Dict, FlowConfig]):
        impl_path = cls.provider_to_class.get(provider)
        if not impl_path:
            raise ValueError(f"Unknown time stepper: {provider}")
        cfg_obj = _ensure(cfg, FlowConfig)
        # explicit steppers take a CFL fraction, IMEX a fixed dt
        step_kw = {"dt": cfg_obj.dt} if provider == "imex" else {"cfl": cfg_obj.cfl}
        return _load(impl_path)(functional=cfg_obj.functional, **step_kw)
