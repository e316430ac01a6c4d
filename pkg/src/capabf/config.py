"""INI configuration files for :class:`~capabf.scenarios.ScenarioConfig`.

Sections and keys (units: Hz, m, W)::

    [run]       seed, trials
    [system]    fc, power
    [aperture]  lx, ly
    [users]     n_users, drop_center, drop_radius, noise_power, calibrate_noise
    [solver]    order, rx_order, max_iters, rel_tol, init, node_map
    [mimo]      n_streams, rx_distance, rx_lx, rx_ly, rx_noise_power, calibrate_rx_noise

``noise_power`` is required unless ``calibrate_noise = true``; the same goes
for ``rx_noise_power`` and ``calibrate_rx_noise``.
"""

import configparser
import dataclasses
import io
import re
from importlib import resources

from .exceptions import CapaError, ConfigError
from .scenarios import ScenarioConfig

# (section, key) -> (ScenarioConfig field, parser)
_FIELDS = {
    ("run", "seed"): ("seed", int),
    ("run", "trials"): ("trials", int),
    ("system", "fc"): ("fc", float),
    ("system", "power"): ("power", float),
    ("aperture", "lx"): ("lx", float),
    ("aperture", "ly"): ("ly", float),
    ("users", "n_users"): ("n_users", int),
    ("users", "drop_center"): ("drop_center", "vec3"),
    ("users", "drop_radius"): ("drop_radius", float),
    ("users", "noise_power"): ("noise_power", float),
    ("solver", "order"): ("order", int),
    ("solver", "rx_order"): ("rx_order", int),
    ("solver", "max_iters"): ("max_iters", int),
    ("solver", "rel_tol"): ("rel_tol", float),
    ("solver", "init"): ("init", str),
    ("solver", "node_map"): ("node_map", str),
    ("mimo", "n_streams"): ("n_streams", int),
    ("mimo", "rx_distance"): ("rx_distance", float),
    ("mimo", "rx_lx"): ("rx_lx", float),
    ("mimo", "rx_ly"): ("rx_ly", float),
    ("mimo", "rx_noise_power"): ("rx_noise_power", float),
}
_FLAGS = (("users", "calibrate_noise"), ("mimo", "calibrate_rx_noise"))
_REQUIRED = {("users", "noise_power"): ("users", "calibrate_noise"),
             ("mimo", "rx_noise_power"): ("mimo", "calibrate_rx_noise")}


def default_config_path():
    return resources.files("capabf") / "data" / "default.ini"


def _line_of(text, section, key):
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return None


def _where(text, section, key):
    line = _line_of(text, section, key)
    return f"[{section}] {key}" + (f" (line {line})" if line else "")


def _convert(raw, kind):
    if kind == "vec3":
        parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
        if len(parts) != 3:
            raise ValueError(f"expected 3 comma-separated numbers, got {raw!r}")
        return tuple(float(p) for p in parts)
    return kind(raw)


def parse_config(text, source="<string>"):
    """Parse INI text into a :class:`ScenarioConfig`.

    Raises
    ------
    ConfigError
        On syntax errors, unknown keys, bad values or missing required
        fields. The message names the field and, where known, the line.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed config: {exc}") from exc

    values = {}
    flags = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if (section, key) in _FLAGS:
                try:
                    flags[(section, key)] = cp.getboolean(section, key)
                except ValueError as exc:
                    raise ConfigError(f"{source}: {_where(text, section, key)}: {exc}",
                                      section, key) from exc
                continue
            if (section, key) not in _FIELDS:
                raise ConfigError(f"{source}: unknown field {_where(text, section, key)}",
                                  section, key)
            name, kind = _FIELDS[(section, key)]
            try:
                values[name] = _convert(raw, kind)
            except ValueError as exc:
                raise ConfigError(f"{source}: {_where(text, section, key)}: invalid value "
                                  f"{raw!r} ({exc})", section, key) from exc

    for (section, key), flag in _REQUIRED.items():
        if _FIELDS[(section, key)][0] not in values and not flags.get(flag, False):
            raise ConfigError(
                f"{source}: missing required field [{section}] {key} "
                f"(set it, or set {flag[1]} = true)", section, key)
    try:
        return ScenarioConfig(**values)
    except (CapaError, ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: invalid configuration: {exc}") from exc


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def load_default_config():
    return parse_config(default_config_path().read_text(encoding="utf-8"), source="default.ini")


def dump_config(config):
    """Render a config as INI text (noise fields written only when set)."""
    cp = configparser.ConfigParser(interpolation=None)
    for (section, key), (name, kind) in _FIELDS.items():
        val = getattr(config, name)
        if val is None:
            continue
        if not cp.has_section(section):
            cp.add_section(section)
        if kind == "vec3":
            text = ", ".join(repr(v) for v in val)
        else:
            text = repr(val) if kind is float else str(val)
        cp.set(section, key, text)
    for section, key in _FLAGS:
        name = "noise_power" if key == "calibrate_noise" else "rx_noise_power"
        cp.set(section, key, "true" if getattr(config, name) is None else "false")
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def with_overrides(config, **kw):
    kw = {k: v for k, v in kw.items() if v is not None}
    return dataclasses.replace(config, **kw) if kw else config
