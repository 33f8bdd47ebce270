"""Run-directory layout: stage records, aggregate tables, and the manifest.

Layout under an output directory:

    config.json                     resolved configuration
    stages/{method}/stage_{t}.json  one record per pipeline stage
    stages/{method}/final.json      final metrics and model digest
    tables/*.csv                    aggregate and report tables
    figures/*.png                   rendered report figures
    manifest.json                   inventory of every written file, with digests

The manifest is written last and atomically, so a complete manifest implies a
complete run.
"""

import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .checkpoint import hash_bytes
from .errors import ValidationError
from .metrics import MetricsTable
from .pipeline import StageRecord
from .toybench.baselines import METHOD_ORDER, MethodRun


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_method_run(out_dir: Path, run: MethodRun) -> list[Path]:
    """Persist one method's stage records and final summary; returns the paths."""
    method_dir = Path(out_dir) / "stages" / run.method
    written = []
    for record in run.records:
        path = method_dir / f"stage_{record.stage}.json"
        write_json(path, record.to_dict())
        written.append(path)
    final = method_dir / "final.json"
    write_json(
        final,
        {
            "method": run.method,
            "metrics": run.final_metrics.to_dict(),
            "model_digest": run.model_digest,
        },
    )
    written.append(final)
    return written


def write_manifest(
    out_dir: Path,
    config_raw: dict | None,
    seed: int | None,
    started: str,
    outputs: Sequence[Path],
    tool_version: str,
) -> Path:
    out_dir = Path(out_dir)
    inventory = {}
    for path in sorted(set(Path(p) for p in outputs)):
        rel = path.relative_to(out_dir).as_posix()
        inventory[rel] = hash_bytes(path.read_bytes())
    manifest = {
        "tool_version": tool_version,
        "config": config_raw,
        "seed": seed,
        "started_utc": started,
        "finished_utc": utc_now(),
        "outputs": inventory,
    }
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    return path


def load_method_runs(run_dir: Path) -> list[MethodRun]:
    """Load every method found under ``stages/``, in the canonical order."""
    stages_dir = Path(run_dir) / "stages"
    if not stages_dir.is_dir():
        raise ValidationError(f"no stage records under {run_dir}")
    found = {}
    for method_dir in stages_dir.iterdir():
        if not method_dir.is_dir():
            continue
        records = []
        for path in method_dir.glob("stage_*.json"):
            records.append(StageRecord.from_dict(_read_json(path)))
        records.sort(key=lambda r: r.stage)
        final_path = method_dir / "final.json"
        if final_path.exists():
            obj = _read_json(final_path)
            final = MetricsTable.from_dict(obj["metrics"])
            model_digest = obj.get("model_digest")
        elif records:
            final = records[-1].metrics_edited
            model_digest = None
        else:
            raise ValidationError(f"{method_dir} holds neither stage records nor a final summary")
        found[method_dir.name] = MethodRun(
            method=method_dir.name,
            records=records,
            final_metrics=final,
            model_digest=model_digest,
        )
    if not found:
        raise ValidationError(f"no stage records under {run_dir}")
    known = [m for m in METHOD_ORDER if m in found]
    extra = sorted(set(found) - set(METHOD_ORDER))
    return [found[m] for m in known + extra]


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"corrupt record {path}: {exc}") from exc
