"""Process-wide defaults held in context variables (solver settings, output directory)."""

from __future__ import annotations

import os
from collections.abc import Callable
from contextvars import ContextVar, Token
from typing import Any, Generic, TypeVar

T = TypeVar("T")

_UNSET: Any = object()


class ConfigOverride(Generic[T]):
    """Handle returned by `ConfigVar.set`; restores the previous value on `reset()` or context exit."""

    def __init__(self, owner: ConfigVar[T], value: T, token: Token[Any]) -> None:
        self.owner = owner
        self.value = value
        self._token: Token[Any] | None = token

    @property
    def active(self) -> bool:
        return self._token is not None

    def __enter__(self) -> ConfigOverride[T]:
        return self

    def __exit__(self, *_: object) -> None:
        if self.active:
            self.reset()

    def reset(self) -> None:
        if self._token is None:
            raise ValueError(f"Override of {self.owner.name!r} has already been reset")

        self.owner.var.reset(self._token)
        self._token = None


class ConfigVar(Generic[T]):
    """
    A named default with three layers: an active `set` override, then the environment
    variable `env` (read on every lookup, blank values ignored), then `default`.
    """

    def __init__(
        self,
        name: str,
        default: T,
        *,
        env: str | None = None,
        parse: Callable[[str], T] | None = None,
    ) -> None:
        self.name = name
        self.default = default
        self.env = env
        self.parse = parse
        self.var: ContextVar[Any] = ContextVar(f"sla_caginalp.{name}", default=_UNSET)

    def __repr__(self) -> str:
        return f"ConfigVar({self.name!r}, current={self.get()!r})"

    def set(self, value: T) -> ConfigOverride[T]:
        return ConfigOverride(self, value, self.var.set(value))

    def explicit(self) -> T | None:
        """The override or environment value; None when only the default applies."""
        value = self.var.get()
        if value is not _UNSET:
            return value  # type: ignore[no-any-return]

        raw = None if self.env is None else os.environ.get(self.env)
        if raw is None or not raw.strip():
            return None
        return raw if self.parse is None else self.parse(raw)  # type: ignore[return-value]

    def get(self) -> T:
        value = self.explicit()
        return self.default if value is None else value

    def resolve(self, value: T | None) -> T:
        """An explicit argument wins over the context default."""
        return self.get() if value is None else value

    @classmethod
    def from_env(
        cls,
        name: str,
        env: str,
        *,
        default: T,
        parse: Callable[[str], T],
    ) -> ConfigVar[T]:
        return cls(name, default, env=env, parse=parse)


__all__ = [
    "ConfigOverride",
    "ConfigVar",
]
