"""
空间参数模块
描述 A^s(E^{s'}_{pq})^σ_{x0} 族范数的完整参数组
"""

import math
from typing import Any, Dict, Literal, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


def _parse_extended(value: Any) -> Any:
    """把 "inf"/"∞" 之类的字符串转换为 math.inf"""
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞", "+inf"):
        return math.inf
    return value


class SpaceParams(BaseModel):
    """空间参数: family B/F, 是否加权(tilde), s, s', σ, p, q, x0, n"""
    family: Literal["B", "F"] = "B"
    tilde: bool = False
    s: float = 0.0
    s_prime: float = 0.0
    sigma: float = 0.0
    p: float = Field(default=2.0, gt=0, description="可取 inf")
    q: float = Field(default=2.0, gt=0, description="可取 inf")
    x0: Tuple[float, ...] = (0.0,)
    n: int = Field(default=1, ge=1, le=3)

    class Config:
        extra = "forbid"
        frozen = True

    @field_validator("p", "q", mode="before")
    @classmethod
    def _extended_real(cls, v: Any) -> Any:
        return _parse_extended(v)

    @field_validator("x0", mode="before")
    @classmethod
    def _scalar_point(cls, v: Any) -> Any:
        if isinstance(v, (int, float)):
            return (float(v),)
        if isinstance(v, str):
            return tuple(float(t) for t in v.replace(";", ",").split(",") if t.strip())
        return v

    @model_validator(mode="after")
    def _check_dimension(self) -> "SpaceParams":
        if len(self.x0) != self.n:
            raise ValueError(f"x0 维数 {len(self.x0)} 与 n={self.n} 不一致")
        return self

    @property
    def n_over_p(self) -> float:
        """n/p, p=∞ 时为 0"""
        return 0.0 if math.isinf(self.p) else self.n / self.p

    def with_(self, **changes: Any) -> "SpaceParams":
        """返回修改部分字段后的新参数(重新校验)"""
        data: Dict[str, Any] = self.model_dump()
        data.update(changes)
        if "n" in changes and "x0" not in changes and len(data["x0"]) != data["n"]:
            data["x0"] = tuple([data["x0"][0]] * data["n"])
        return SpaceParams(**data)

    def describe(self) -> Dict[str, Any]:
        """可JSON序列化的参数字典, inf 写作字符串"""
        data = self.model_dump()
        for key in ("p", "q"):
            if math.isinf(data[key]):
                data[key] = "inf"
        data["x0"] = list(data["x0"])
        return data
