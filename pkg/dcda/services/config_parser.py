# dcda/services/config_parser.py
"""Flat ``key = value`` experiment files.

Keys are dotted (``policy.kind``), ``#`` starts a comment, blank lines are
ignored. Every problem in a file is reported at once with its line number.
"""

import logging
import re
from typing import Any, Dict, List, Optional, Tuple

from pydantic import ValidationError

from dcda.core.exceptions import ConfigurationError
from dcda.models.experiment import CROSS_FIELD_SEPARATOR, ExperimentConfig, SweepSpec, known_keys

logger = logging.getLogger(__name__)

SWEEP_PREFIX = "sweep."
ErrorEntry = Tuple[Optional[int], str, str]

_CROSS_FIELD = re.compile(r"^([A-Za-z_][\w.]*): (.*)$")


def _read_pairs(text: str, allowed_prefix: Optional[str] = None) -> Tuple[Dict[str, Tuple[str, int]], List[ErrorEntry]]:
    """key -> (raw value, line number) plus syntax / duplicate / unknown-key errors"""
    pairs: Dict[str, Tuple[str, int]] = {}
    errors: List[ErrorEntry] = []
    known = set(known_keys())
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append((number, line, "expected 'key = value'"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            errors.append((number, "", "missing key before '='"))
            continue
        if key in pairs:
            first = pairs[key][1]
            errors.append((number, key, f"duplicate key (lines {first} and {number})"))
            continue
        if key not in known and not (allowed_prefix and key.startswith(allowed_prefix)):
            errors.append((number, key, "unknown key"))
            continue
        pairs[key] = (value, number)
    return pairs, errors


def _nest(flat: Dict[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if "." in key:
            section, name = key.split(".", 1)
            nested.setdefault(section, {})[name] = value
        else:
            nested[key] = value
    return nested


def _validation_errors(exc: ValidationError, lines: Dict[str, int]) -> List[ErrorEntry]:
    out: List[ErrorEntry] = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"])
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        if not loc or loc.count(".") == 0 and err["type"] == "value_error":
            for part in msg.split(CROSS_FIELD_SEPARATOR):
                match = _CROSS_FIELD.match(part)
                key, text = (match.group(1), match.group(2)) if match else (loc or "config", part)
                out.append((lines.get(key), key, text))
            continue
        if err["type"] == "missing" and "." not in loc:
            out.append((None, loc, "missing required section"))
            continue
        out.append((lines.get(loc), loc, msg))
    return out


def config_from_flat(flat: Dict[str, Any], lines: Optional[Dict[str, int]] = None) -> ExperimentConfig:
    """Validate a dotted-key mapping into an ExperimentConfig"""
    lines = lines or {}
    try:
        return ExperimentConfig.model_validate(_nest(flat))
    except ValidationError as e:
        errors = _validation_errors(e, lines)
        raise ConfigurationError(f"{len(errors)} configuration error(s)", errors=_sorted(errors)) from e


def _sorted(errors: List[ErrorEntry]) -> List[ErrorEntry]:
    return sorted(errors, key=lambda e: (e[0] is None, e[0] or 0, e[1]))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate one experiment file"""
    pairs, errors = _read_pairs(text)
    flat = {key: value for key, (value, _) in pairs.items()}
    lines = {key: number for key, (_, number) in pairs.items()}
    try:
        config = config_from_flat(flat, lines)
    except ConfigurationError as e:
        errors.extend(e.errors)
        config = None
    if errors:
        logger.debug(f"Config rejected with {len(errors)} error(s)")
        raise ConfigurationError(f"{len(errors)} configuration error(s)", errors=_sorted(errors))
    return config


def render_config(config: ExperimentConfig) -> str:
    """``key = value`` text that parses back into an equal config"""
    flat = config.to_flat()
    return "".join(f"{key} = {flat[key]}\n" for key in known_keys() if key in flat)


def _split_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_sweep(text: str) -> SweepSpec:
    """Base config plus ``sweep.<key> = v1, v2`` lines and ``sweep.seeds = 1, 2``.

    Every expanded grid point is validated before anything runs.
    """
    pairs, errors = _read_pairs(text, allowed_prefix=SWEEP_PREFIX)
    base: Dict[str, Any] = {}
    sweep: Dict[str, List[str]] = {}
    seeds: Optional[List[int]] = None
    lines: Dict[str, int] = {}
    for key, (value, number) in pairs.items():
        lines[key] = number
        if not key.startswith(SWEEP_PREFIX):
            base[key] = value
            continue
        target = key[len(SWEEP_PREFIX):]
        if target == "seeds":
            try:
                seeds = [int(v) for v in _split_list(value)]
            except ValueError:
                errors.append((number, key, f"seeds must be integers, got '{value}'"))
        else:
            sweep[target] = _split_list(value)
            lines[target] = number

    if errors:
        raise ConfigurationError(f"{len(errors)} sweep error(s)", errors=_sorted(errors))
    try:
        spec = SweepSpec(base=base, sweep=sweep, seeds=seeds if seeds is not None else [0])
    except ValidationError as e:
        entries = [(None, ".".join(str(p) for p in err["loc"]), err["msg"]) for err in e.errors()]
        raise ConfigurationError(f"{len(entries)} sweep error(s)", errors=entries) from e

    for label, flat in spec.expand():
        try:
            config_from_flat(flat, lines)
        except ConfigurationError as e:
            errors.extend((line, key, f"{msg} [{label}]") for line, key, msg in e.errors)
    if errors:
        raise ConfigurationError(f"{len(errors)} sweep error(s)", errors=_sorted(errors))
    logger.info(f"Sweep over {list(sweep) or 'seeds'}: {len(spec.expand())} runs")
    return spec
