"""Deterministic CSV series files, their digests and the run summary."""
import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)

VALUE_FORMAT = "%.17g"


class OutputFile(BaseModel):
    """A written file and its SHA-256 digest."""

    path: str
    sha256: str


def file_sha256(path: Path) -> str:
    """Calculate the SHA-256 digest of a local file."""
    sha256 = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha256.update(chunk)
    return sha256.hexdigest()


def write_series_csv(
    path: Path,
    times: np.ndarray,
    columns: Mapping[str, np.ndarray],
    provenance: Sequence[str] = (),
) -> OutputFile:
    """
    Write a time column plus named value columns.

    Provenance lines come first, each prefixed with '# ', then the header row
    and one row per sample printed with 17 significant digits.
    """
    names = ["t", *columns]
    values = [np.asarray(v, dtype=float) for v in columns.values()]
    table = np.column_stack([times, *values])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in provenance:
            f.write(f"# {line}\n")
        np.savetxt(
            f,
            table,
            fmt=VALUE_FORMAT,
            delimiter=",",
            header=",".join(names),
            comments="",
        )
    written = OutputFile(path=str(path), sha256=file_sha256(path))
    logger.debug("Wrote series.", extra={"path": written.path, "rows": len(times)})
    return written


def read_series_csv(path: Path) -> Tuple[Dict[str, np.ndarray], List[str]]:
    """
    Read a file written by ``write_series_csv``.

    Returns:
        The columns by name (``t`` first) and the provenance lines.

    Raises:
        ValueError: If there is no header row or no data.

    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    provenance = [line[2:] for line in lines if line.startswith("#")]
    body = [line for line in lines if line.strip() and not line.startswith("#")]
    if len(body) < 2:
        raise ValueError(f"{path}: expected a header row and at least one sample")
    names = [name.strip() for name in body[0].split(",")]
    table = np.loadtxt(body[1:], delimiter=",", ndmin=2)
    if table.shape[1] != len(names):
        raise ValueError(
            f"{path}: header has {len(names)} columns, rows have {table.shape[1]}"
        )
    return {name: table[:, i] for i, name in enumerate(names)}, provenance


def write_summary(path: Path, summary: BaseModel) -> OutputFile:
    """Write a pydantic summary as indented JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return OutputFile(path=str(path), sha256=file_sha256(path))
