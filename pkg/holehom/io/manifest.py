import csv
import json
import logging
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from holehom import __version__
from holehom.io.config import RunConfig, canonical_json, config_hash

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
NOTE_LOGGERS = (
    "holehom.geometry",
    "holehom.field",
    "holehom.elliptic",
    "holehom.corrector",
    "holehom.quantify",
    "holehom.ensemble",
    "holehom.twoscale",
)


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class NoteCollector(logging.Handler):
    """Collects distinct INFO-and-above messages from the numerical modules

    These are the proxy and surrogate notes (ergodic proxy, saturation proxy,
    weight truncation, ...) that belong in the run manifest.
    """

    def __init__(self):
        super().__init__(level=logging.INFO)
        self.notes: List[str] = []

    def emit(self, record: logging.LogRecord):
        if not record.name.startswith(NOTE_LOGGERS):
            return
        message = record.getMessage()
        if message not in self.notes:
            self.notes.append(message)

    def __enter__(self) -> "NoteCollector":
        root = logging.getLogger("holehom")
        self._previous_level = root.level
        if root.getEffectiveLevel() > logging.INFO:
            root.setLevel(logging.INFO)
        root.addHandler(self)
        return self

    def __exit__(self, *exc):
        root = logging.getLogger("holehom")
        root.removeHandler(self)
        root.setLevel(self._previous_level)
        return False


@dataclass
class RunManifest:
    command: str
    config_hash: str
    config: Dict[str, Any]
    master_seed: int
    tool_version: str = __version__
    python_version: str = field(default_factory=platform.python_version)
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    status: str = "running"
    notes: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=dict)
    error: Optional[str] = None

    @classmethod
    def for_config(cls, command: str, config: RunConfig) -> "RunManifest":
        return cls(
            command=command,
            config_hash=config_hash(config),
            config=json.loads(canonical_json(config)),
            master_seed=config.ensemble.master_seed if command in ("ensemble", "variance-scaling", "twoscale") else config.geometry.seed,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def format_value(value: Any) -> Any:
    """CSV cell text: shortest round-trip repr for floats, '' for None"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        for row in rows:
            writer.writerow({column: format_value(row.get(column)) for column in columns})


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_json(path: Path, document: Any):
    path.write_text(json.dumps(document, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(value):
    if hasattr(value, "to_dict"):
        return value.to_dict()
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


class RunDirectory:
    """Output directory of one command: manifest first, results after

    Used as a context manager. On an exception the result files written so
    far are removed and the manifest is rewritten with status "incomplete".
    """

    def __init__(self, path, command: str, config: RunConfig):
        self.path = Path(path)
        self.manifest = RunManifest.for_config(command, config)
        self.collector = NoteCollector()

    def __enter__(self) -> "RunDirectory":
        self.path.mkdir(parents=True, exist_ok=True)
        stale = self.path / MANIFEST_NAME
        if stale.exists():
            logger.warning(f"Overwriting existing manifest in {self.path}")
        self._write_manifest()
        self.collector.__enter__()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.collector.__exit__(exc_type, exc, tb)
        self.manifest.notes.extend(note for note in self.collector.notes if note not in self.manifest.notes)
        self.manifest.finished_at = _now()
        if exc_type is None:
            self.manifest.status = "complete"
        else:
            self.manifest.status = "incomplete"
            self.manifest.error = f"{exc_type.__name__}: {exc}"
            self.discard()
        self._write_manifest()
        logger.info(f"Run {self.manifest.status}: {self.path / MANIFEST_NAME}")
        return False

    def _write_manifest(self):
        write_json(self.path / MANIFEST_NAME, self.manifest.to_dict())

    def add_timing(self, name: str, seconds: float):
        self.manifest.timing[name] = float(seconds)

    def add_notes(self, notes: Iterable[str]):
        for note in notes:
            if note not in self.manifest.notes:
                self.manifest.notes.append(note)

    def write_csv(self, name: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
        path = self.path / name
        write_csv(path, columns, rows)
        self.record(name)
        return path

    def write_json(self, name: str, document: Any) -> Path:
        path = self.path / name
        write_json(path, document)
        self.record(name)
        return path

    def record(self, name: str):
        if name not in self.manifest.outputs:
            self.manifest.outputs.append(name)
        logger.debug(f"Wrote {self.path / name}")

    def discard(self):
        for name in self.manifest.outputs:
            (self.path / name).unlink(missing_ok=True)
        logger.warning(f"Removed {len(self.manifest.outputs)} partial outputs from {self.path}")
        self.manifest.outputs = []
