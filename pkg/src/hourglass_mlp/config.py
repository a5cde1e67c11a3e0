"""Flat key=value config files with dotted sections (arch.d_z=3546).

Chosen for diffability in experiment logs. `Resolver` applies the
flag > file > default precedence and records every resolved value so the run
manifest can snapshot the exact effective configuration.
"""

from __future__ import annotations

from .errors import ConfigError


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config_file(path) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None


def dump_config(kv: dict[str, str]) -> str:
    return "".join(f"{k}={kv[k]}\n" for k in sorted(kv))


_BOOL = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


class Resolver:
    """Typed access with recorded resolution and unknown-key detection."""

    def __init__(self, kv: dict[str, str], overrides: dict[str, str] | None = None):
        self._kv = dict(kv)
        if overrides:
            self._kv.update({k: v for k, v in overrides.items() if v is not None})
        self.resolved: dict[str, str] = {}
        self._touched: set[str] = set()

    def _raw(self, key: str, default, required: bool):
        self._touched.add(key)
        if key in self._kv:
            return self._kv[key]
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default

    def get_str(self, key: str, default: str | None = None, required: bool = False) -> str | None:
        value = self._raw(key, default, required)
        if value is not None:
            self.resolved[key] = str(value)
        return value

    def get_int(self, key: str, default: int | None = None, required: bool = False) -> int | None:
        value = self._raw(key, default, required)
        if value is None:
            return None
        try:
            out = int(str(value))
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}") from None
        self.resolved[key] = str(out)
        return out

    def get_float(self, key: str, default: float | None = None, required: bool = False) -> float | None:
        value = self._raw(key, default, required)
        if value is None:
            return None
        try:
            out = float(str(value))
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}") from None
        self.resolved[key] = repr(out)
        return out

    def get_bool(self, key: str, default: bool = False) -> bool:
        value = self._raw(key, default, required=False)
        if isinstance(value, bool):
            self.resolved[key] = "1" if value else "0"
            return value
        lowered = str(value).lower()
        if lowered not in _BOOL:
            raise ConfigError(f"config key {key!r} must be a boolean, got {value!r}")
        out = _BOOL[lowered]
        self.resolved[key] = "1" if out else "0"
        return out

    def get_int_list(self, key: str, required: bool = False) -> list[int]:
        value = self._raw(key, None, required)
        if value is None:
            return []
        try:
            return [int(tok) for tok in str(value).split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"config key {key!r} must be comma-separated integers") from None
        finally:
            self.resolved[key] = str(value)

    def get_float_list(self, key: str, required: bool = False) -> list[float]:
        value = self._raw(key, None, required)
        if value is None:
            return []
        try:
            return [float(tok) for tok in str(value).split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"config key {key!r} must be comma-separated numbers") from None
        finally:
            self.resolved[key] = str(value)

    def set_default(self, key: str, value: str) -> None:
        self._kv.setdefault(key, value)

    def reject_unknown(self, known_prefixes: tuple[str, ...] = ()) -> None:
        unknown = [
            k
            for k in self._kv
            if k not in self._touched and not any(k.startswith(p) for p in known_prefixes)
        ]
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
