"""
参数预设模块
把经典函数空间写成 A^s(E^{s'}_{pq})^σ_{x0} 族的特例

    classical(family, s', p, q)      → A^0(E^{s'}_{pq})^0
    besov-type(family, s', τ, p, q)  → A^{nτ}(E^{s'}_{pq})^0
    morrey(u, p)                     → A^{n(1/p-1/u)}(F^0_{p2})^0, 1 < p < u < ∞
    b-sigma-morrey(λ, p, σ)          → A^{λ+n/p}(F^0_{p2})^σ_0, 1 < p < ∞
    local-morrey(p, λ)               → (F^0_{p2})^{λ/p}_0, 1 < p < ∞
"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from loguru import logger

from .exceptions import InvalidConfigError
from .params import SpaceParams


def _number(value: Any, key: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "∞"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InvalidConfigError(f"预设参数 {key} 不是数值: {value}")


def _point(value: Any, n: int) -> Tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    if isinstance(value, str) and ";" in value:
        return tuple(float(v) for v in value.split(";"))
    return tuple([_number(value, "x0")] * n)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidConfigError(message)


def _classical(args: Dict[str, Any], n: int, x0: Tuple[float, ...]) -> SpaceParams:
    return SpaceParams(
        family=args.get("family", "B"),
        s=0.0,
        s_prime=_number(args.get("s_prime", 0.0), "s_prime"),
        sigma=0.0,
        p=_number(args.get("p", 2.0), "p"),
        q=_number(args.get("q", 2.0), "q"),
        x0=x0,
        n=n,
    )


def _besov_type(args: Dict[str, Any], n: int, x0: Tuple[float, ...]) -> SpaceParams:
    tau = _number(args.get("tau", 0.0), "tau")
    _require(tau >= 0, f"besov-type 需要 τ ≥ 0: {tau}")
    return _classical(args, n, x0).with_(s=n * tau)


def _morrey(args: Dict[str, Any], n: int, x0: Tuple[float, ...]) -> SpaceParams:
    u = _number(args.get("u", 4.0), "u")
    p = _number(args.get("p", 2.0), "p")
    _require(1 < p < u < math.inf, f"morrey 需要 1 < p < u < ∞: p={p}, u={u}")
    return SpaceParams(family="F", s=n * (1.0 / p - 1.0 / u), s_prime=0.0, sigma=0.0, p=p, q=2.0, x0=x0, n=n)


def _b_sigma_morrey(args: Dict[str, Any], n: int, x0: Tuple[float, ...]) -> SpaceParams:
    lam = _number(args.get("lam", args.get("lambda", 0.0)), "lambda")
    p = _number(args.get("p", 2.0), "p")
    sigma = _number(args.get("sigma", 0.0), "sigma")
    _require(1 < p < math.inf, f"b-sigma-morrey 需要 1 < p < ∞: {p}")
    return SpaceParams(family="F", s=lam + n / p, s_prime=0.0, sigma=sigma, p=p, q=2.0, x0=x0, n=n)


def _local_morrey(args: Dict[str, Any], n: int, x0: Tuple[float, ...]) -> SpaceParams:
    p = _number(args.get("p", 2.0), "p")
    lam = _number(args.get("lam", args.get("lambda", 0.0)), "lambda")
    _require(1 < p < math.inf, f"local-morrey 需要 1 < p < ∞: {p}")
    return SpaceParams(family="F", s=0.0, s_prime=0.0, sigma=lam / p, p=p, q=2.0, x0=x0, n=n)


@dataclass(frozen=True)
class Preset:
    name: str
    keys: Tuple[str, ...]
    build: Callable[[Dict[str, Any], int, Tuple[float, ...]], SpaceParams]
    origin_centered: bool = False


class PresetTable:
    """预设名 → SpaceParams 构造器"""

    def __init__(self) -> None:
        self._presets: Dict[str, Preset] = {}
        for preset in (
            Preset("classical", ("family", "s_prime", "p", "q"), _classical),
            Preset("besov-type", ("family", "s_prime", "tau", "p", "q"), _besov_type),
            Preset("morrey", ("u", "p"), _morrey),
            Preset("b-sigma-morrey", ("lam", "lambda", "p", "sigma"), _b_sigma_morrey, origin_centered=True),
            Preset("local-morrey", ("p", "lam", "lambda"), _local_morrey, origin_centered=True),
        ):
            self.register(preset)

    def register(self, preset: Preset) -> None:
        self._presets[preset.name] = preset

    def names(self) -> List[str]:
        return sorted(self._presets)

    def get(self, name: str, **kwargs: Any) -> SpaceParams:
        """
        Raises:
            InvalidConfigError: 未知预设, 未知参数或参数越界
        """
        if name not in self._presets:
            raise InvalidConfigError(f"未知的预设: {name}, 可选: {self.names()}")
        preset = self._presets[name]
        allowed = set(preset.keys) | {"x0", "n"}
        unknown = set(kwargs) - allowed
        if unknown:
            raise InvalidConfigError(f"预设 {name} 不接受参数: {sorted(unknown)}")

        n = int(kwargs.get("n", 1))
        default_x0 = 0.0 if preset.origin_centered else 0.5
        x0 = _point(kwargs.get("x0", default_x0), n)
        try:
            params = preset.build(kwargs, n, x0)
        except InvalidConfigError:
            raise
        except ValueError as e:
            raise InvalidConfigError(f"预设 {name} 参数不合法: {e}")
        logger.debug(f"预设 {name} → {params.describe()}")
        return params


def parse_preset(text: str, table: Optional[PresetTable] = None) -> SpaceParams:
    """
    解析 "name:k=v,k=v" 形式的预设

    Examples:
        parse_preset("morrey:u=4,p=2")
        parse_preset("besov-type:family=F,s_prime=0.5,tau=0.25,p=2,q=2")
    """
    table = table or PresetTable()
    name, _, rest = text.partition(":")
    kwargs: Dict[str, Any] = {}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidConfigError(f"预设参数格式应为 k=v: {item}")
        kwargs[key.strip()] = value.strip()
    return table.get(name.strip(), **kwargs)
