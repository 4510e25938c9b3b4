"""Pipeline configuration: a single JSON document, validated up front.

Relative paths are resolved against the directory holding the config file.
Paths written into outputs (e.g. the manifest's audio column) keep the
spelling used in the config, so outputs do not depend on where the tree is
checked out.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from .activation import EnergyVadParams
from .segmenter import MergeParams, ParameterError, SegmenterParams
from .textclean import CleanRules

STAGES = ("segment", "clean", "dedup", "langid", "align_filter", "select")
TEXT_STAGES = STAGES[1:]

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "output_dir": "out",
    "figures": True,
    "segment": {
        "enabled": False,
        "inputs": [],
        "manifest": None,
        "p_on": 0.481,
        "p_off": 0.810,
        "alpha_on": 0.1,
        "alpha_off": 0.028,
        "t_dur_s": 43.75,
        "escalation_cap": 0.95,
        "merge": True,
        "m_dur_s": 30.0,
        "m_int_s": 1.0,
        "frame_ms": 25.0,
        "hop_ms": 20.0,
        "floor_db": -60.0,
        "ceil_db": -20.0,
    },
    "clean": {
        "enabled": False,
        "input": None,
        "output": None,
        "default_max_token_chars": 50,
        "max_token_chars": {"ja": 150, "zh": 150},
        "reject_nonprinting": True,
        "reject_urls": True,
    },
    "dedup": {"enabled": False, "input": None, "output": None},
    "langid": {
        "enabled": False,
        "input": None,
        "output": None,
        "expected_lang": None,
        "seeds": {},
    },
    "align_filter": {
        "enabled": False,
        "input": None,
        "output": None,
        "qualities": None,
        "iterations": 5,
        "diagonal_lambda": None,
        "fraction": 0.2,
        "posterior_floor": 0.5,
        "table": None,
    },
    "select": {
        "enabled": False,
        "input": None,
        "output": None,
        "scores": None,
        "in_domain": None,
        "out_domain": None,
        "lang": None,
        "order": 3,
        "include_eos": True,
        "policy": "threshold",
        "k": None,
        "threshold": 0.0,
        "side": "tgt",
    },
}

DEFAULT_OUTPUTS = {
    ("segment", "manifest"): "segments.tsv",
    ("clean", "output"): "clean.jsonl",
    ("dedup", "output"): "dedup.jsonl",
    ("langid", "output"): "langid.jsonl",
    ("align_filter", "output"): "align_filter.jsonl",
    ("align_filter", "qualities"): "align_qualities.tsv",
    ("select", "output"): "select.jsonl",
    ("select", "scores"): "select_scores.tsv",
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where + key!r}")
        if isinstance(base[key], dict) and key in STAGES:
            out[key] = _merge(base[key], value, f"{key}.")
        else:
            out[key] = value
    return out


def parse_override(text: str):
    """``stage.key=value``; the value is read as JSON when it parses, else as a string."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects stage.key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


class Config:
    def __init__(self, data: Optional[dict] = None, base_dir: Path = Path(".")):
        self.data = _merge(DEFAULTS, data or {})
        self.base_dir = Path(base_dir)

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls(data, path.parent)

    def set(self, keys: List[str], value) -> None:
        node = self.data
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                raise ConfigError(f"unknown config section {'.'.join(keys[:-1])!r}")
            node = node[k]
        if keys[-1] not in node:
            raise ConfigError(f"unknown config key {'.'.join(keys)!r}")
        node[keys[-1]] = value

    def __getitem__(self, key):
        return self.data[key]

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def output_path(self, stage: str, key: str) -> Path:
        given = self.data[stage][key]
        if given:
            return self.resolve(given)
        return self.resolve(self.data["output_dir"]) / DEFAULT_OUTPUTS[(stage, key)]

    def segmenter_params(self) -> SegmenterParams:
        s = self.data["segment"]
        return SegmenterParams(s["p_on"], s["p_off"], s["alpha_on"], s["alpha_off"], s["t_dur_s"], s["escalation_cap"])

    def merge_params(self) -> MergeParams:
        s = self.data["segment"]
        return MergeParams(s["m_dur_s"], s["m_int_s"])

    def energy_params(self) -> EnergyVadParams:
        s = self.data["segment"]
        return EnergyVadParams(s["frame_ms"], s["hop_ms"], s["floor_db"], s["ceil_db"])

    def clean_rules(self) -> CleanRules:
        s = self.data["clean"]
        return CleanRules(
            max_token_chars=dict(s["max_token_chars"]),
            default_max_token_chars=s["default_max_token_chars"],
            reject_nonprinting=bool(s["reject_nonprinting"]),
            reject_urls=bool(s["reject_urls"]),
        )

    def _require(self, path_value, what: str) -> None:
        if not path_value:
            raise ConfigError(f"{what} is required")
        if not self.resolve(path_value).exists():
            raise ConfigError(f"{what}: path does not exist: {path_value}")

    def validate(self, stages) -> None:
        """Check parameters and input paths for ``stages`` (run order).

        A text stage without an ``input`` reads the previous text stage's
        output, so only the first one in the chain needs an input path.
        """
        d = self.data
        if not isinstance(d["workers"], int) or d["workers"] < 1:
            raise ConfigError(f"workers must be a positive integer, got {d['workers']!r}")
        previous_text_output = False
        for stage in stages:
            s = d[stage]
            try:
                if stage == "segment":
                    self.segmenter_params().validate()
                    self.merge_params().validate()
                    self.energy_params().validate()
                    if not isinstance(s["inputs"], list):
                        raise ConfigError("segment.inputs must be a list of paths")
                    for p in s["inputs"]:
                        self._require(p, "segment.inputs")
                    continue
                if s["input"]:
                    self._require(s["input"], f"{stage}.input")
                elif not previous_text_output:
                    raise ConfigError(f"{stage}.input is required")
                previous_text_output = True
                if stage == "clean":
                    self.clean_rules()
                elif stage == "langid":
                    if not s["seeds"]:
                        raise ConfigError("langid.seeds must map languages to seed text files")
                    for lang, p in s["seeds"].items():
                        self._require(p, f"langid.seeds.{lang}")
                    if s["expected_lang"] is not None and s["expected_lang"] not in s["seeds"]:
                        raise ConfigError(f"langid.expected_lang {s['expected_lang']!r} has no seed corpus")
                elif stage == "align_filter":
                    if not isinstance(s["iterations"], int) or s["iterations"] < 1:
                        raise ConfigError("align_filter.iterations must be a positive integer")
                    if not 0.0 <= s["fraction"] < 1.0:
                        raise ConfigError("align_filter.fraction must be in [0, 1)")
                    if s["diagonal_lambda"] is not None and s["diagonal_lambda"] < 0:
                        raise ConfigError("align_filter.diagonal_lambda must be >= 0")
                elif stage == "select":
                    self._require(s["in_domain"], "select.in_domain")
                    self._require(s["out_domain"], "select.out_domain")
                    if s["policy"] not in ("threshold", "top-k"):
                        raise ConfigError("select.policy must be 'threshold' or 'top-k'")
                    if s["policy"] == "top-k" and not isinstance(s["k"], int):
                        raise ConfigError("select.k must be an integer for the top-k policy")
                    if s["side"] not in ("src", "tgt"):
                        raise ConfigError("select.side must be 'src' or 'tgt'")
                    if not isinstance(s["order"], int) or s["order"] < 1:
                        raise ConfigError("select.order must be a positive integer")
            except (ParameterError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"{stage}: {exc}") from None
