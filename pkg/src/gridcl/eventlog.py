"""Bit-exact experiment logs: per-lifetime directories of JSONL episode files.

Layout:
    <log_root>/<run_name>/run_metadata.json
    <log_root>/<run_name>/lifetime_<i>/lifetime_metadata.json
    <log_root>/<run_name>/lifetime_<i>/block_<nnnn>.jsonl

Episode lines use a fixed key order and shortest round-trip float form, so
identical records always serialize to identical bytes. Timestamps live only
in metadata, keeping episode files comparable across runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path


class LogReadError(ValueError):
    """Raised for corrupt or schema-violating log files."""


@dataclass(slots=True)
class EpisodeRecord:
    block_num: int
    block_type: str  # "learn" | "eval"
    task_name: str
    variant_name: str
    episode_id: int  # per lifetime, assigned in completion order
    steps: int
    reward: float  # sum of true env rewards, even when hidden from the agent
    truncated: bool
    env_seed: int


_FIELD_TYPES = (
    ("block_num", int),
    ("block_type", str),
    ("task_name", str),
    ("variant_name", str),
    ("episode_id", int),
    ("steps", int),
    ("reward", (int, float)),
    ("truncated", bool),
    ("env_seed", int),
)


def encode_episode(rec: EpisodeRecord) -> str:
    payload = {
        "block_num": rec.block_num,
        "block_type": rec.block_type,
        "task_name": rec.task_name,
        "variant_name": rec.variant_name,
        "episode_id": rec.episode_id,
        "steps": rec.steps,
        "reward": float(rec.reward),
        "truncated": rec.truncated,
        "env_seed": rec.env_seed,
    }
    return json.dumps(payload, separators=(",", ":"))


def decode_episode(line: str, where: str) -> EpisodeRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as e:
        raise LogReadError(f"{where}: malformed JSON ({e.msg})") from None
    if not isinstance(payload, dict):
        raise LogReadError(f"{where}: expected an object")
    for key, kind in _FIELD_TYPES:
        if key not in payload:
            raise LogReadError(f"{where}: missing field '{key}'")
        value = payload[key]
        if isinstance(value, bool) and kind is not bool:
            raise LogReadError(f"{where}: field '{key}' has wrong type bool")
        if not isinstance(value, kind):
            raise LogReadError(f"{where}: field '{key}' has wrong type {type(value).__name__}")
    extra = set(payload) - {k for k, _ in _FIELD_TYPES}
    if extra:
        raise LogReadError(f"{where}: unknown fields {sorted(extra)}")
    if payload["block_type"] not in ("learn", "eval"):
        raise LogReadError(f"{where}: block_type must be 'learn' or 'eval'")
    if payload["steps"] < 1:
        raise LogReadError(f"{where}: steps must be >= 1")
    return EpisodeRecord(
        block_num=payload["block_num"],
        block_type=payload["block_type"],
        task_name=payload["task_name"],
        variant_name=payload["variant_name"],
        episode_id=payload["episode_id"],
        steps=payload["steps"],
        reward=float(payload["reward"]),
        truncated=payload["truncated"],
        env_seed=payload["env_seed"],
    )


@dataclass(slots=True)
class LifetimeMetadata:
    lifetime_index: int
    master_seed: int
    lifetime_seed: int
    curriculum_seed: int
    agent_seed: int
    curriculum_name: str
    agent_name: str
    harness_version: str
    started_at: str  # ISO-8601
    finished_at: str
    status: str  # "ok" | "failed"
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "lifetime_index": self.lifetime_index,
            "master_seed": self.master_seed,
            "lifetime_seed": self.lifetime_seed,
            "curriculum_seed": self.curriculum_seed,
            "agent_seed": self.agent_seed,
            "curriculum_name": self.curriculum_name,
            "agent_name": self.agent_name,
            "harness_version": self.harness_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
            "error": self.error,
        }

    @staticmethod
    def from_json(payload: dict, where: str) -> "LifetimeMetadata":
        try:
            return LifetimeMetadata(**payload)
        except TypeError as e:
            raise LogReadError(f"{where}: bad lifetime metadata ({e})") from None


_BLOCK_FILE = re.compile(r"^block_(\d{4,})\.jsonl$")


def block_file_name(block_num: int) -> str:
    return f"block_{block_num:04d}.jsonl"


class LifetimeLogWriter:
    """Appends episode records into per-block JSONL files for one lifetime."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._file = None
        self._block_num: int | None = None
        self.episodes_written = 0

    def append_episode(self, rec: EpisodeRecord) -> None:
        if self._block_num != rec.block_num:
            if self._file is not None:
                self._file.close()
            self._block_num = rec.block_num
            self._file = open(self.directory / block_file_name(rec.block_num), "a", encoding="utf-8")
        self._file.write(encode_episode(rec) + "\n")
        self.episodes_written += 1

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def __enter__(self) -> "LifetimeLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_lifetime_metadata(directory: str | Path, meta: LifetimeMetadata) -> None:
    path = Path(directory) / "lifetime_metadata.json"
    path.write_text(json.dumps(meta.to_json(), indent=2) + "\n", encoding="utf-8")


def read_lifetime(directory: str | Path) -> tuple[LifetimeMetadata, list[EpisodeRecord]]:
    """Read one lifetime directory back; records come in (block, line) order."""
    directory = Path(directory)
    meta_path = directory / "lifetime_metadata.json"
    if not meta_path.is_file():
        raise LogReadError(f"{meta_path}: missing lifetime metadata")
    try:
        meta_payload = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise LogReadError(f"{meta_path}: malformed JSON ({e.msg})") from None
    meta = LifetimeMetadata.from_json(meta_payload, str(meta_path))

    block_files = []
    for entry in directory.iterdir():
        m = _BLOCK_FILE.match(entry.name)
        if m:
            block_files.append((int(m.group(1)), entry))
    block_files.sort()

    records: list[EpisodeRecord] = []
    last_episode_id = -1
    for block_num, path in block_files:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    raise LogReadError(f"{path}:{lineno}: blank line")
                rec = decode_episode(line, f"{path}:{lineno}")
                if rec.block_num != block_num:
                    raise LogReadError(f"{path}:{lineno}: block_num {rec.block_num} does not match file")
                if rec.episode_id <= last_episode_id:
                    raise LogReadError(f"{path}:{lineno}: episode_id {rec.episode_id} not strictly increasing")
                last_episode_id = rec.episode_id
                records.append(rec)
    return meta, records


def write_run_metadata(run_dir: str | Path, payload: dict) -> None:
    path = Path(run_dir) / "run_metadata.json"
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_run_metadata(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "run_metadata.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LogReadError(f"{path}: missing run metadata") from None
    except json.JSONDecodeError as e:
        raise LogReadError(f"{path}: malformed JSON ({e.msg})") from None


def lifetime_dirs(run_dir: str | Path) -> list[Path]:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        return []
    dirs = []
    for entry in sorted(run_dir.iterdir()):
        if entry.is_dir() and re.match(r"^lifetime_\d+$", entry.name):
            dirs.append(entry)
    dirs.sort(key=lambda p: int(p.name.split("_")[1]))
    return dirs
