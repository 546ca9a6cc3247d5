"""Dataset inventory, deterministic splitting, and manifest files.

The expected layout is one directory per subject containing that subject's
sample images. The manifest file is CSV with the fixed header
`path,subject_id,sample_idx,modality,split`, UTF-8 with LF line endings;
this is the interchange contract shared with the training harness, so the
format carries records only (source_root and seed are runtime context).
"""

from __future__ import annotations

import logging
import os
import random
import re
import tempfile
from dataclasses import dataclass, replace

from .errors import ManifestError

log = logging.getLogger(__name__)

MANIFEST_HEADER = "path,subject_id,sample_idx,modality,split"
MODALITIES = ("touchless", "touchbased")
SPLITS = ("train", "test", "unassigned")
MAX_SAMPLES_PER_SUBJECT = 4

_IMAGE_EXTS = (".png", ".bmp")
_SUBJECT_DIR_RE = re.compile(r"\D*(\d+)")


@dataclass(frozen=True)
class SampleRecord:
    path: str
    subject_id: int
    sample_idx: int
    modality: str = "touchless"
    split: str = "unassigned"

    def __post_init__(self):
        if not self.path:
            raise ManifestError("record path must be nonempty")
        if self.subject_id < 1:
            raise ManifestError(f"{self.path}: subject_id must be >= 1, got {self.subject_id}")
        if not 1 <= self.sample_idx <= MAX_SAMPLES_PER_SUBJECT:
            raise ManifestError(
                f"{self.path}: sample_idx must be in [1, {MAX_SAMPLES_PER_SUBJECT}], "
                f"got {self.sample_idx}"
            )
        if self.modality not in MODALITIES:
            raise ManifestError(f"{self.path}: unknown modality {self.modality!r}")
        if self.split not in SPLITS:
            raise ManifestError(f"{self.path}: unknown split {self.split!r}")


@dataclass(frozen=True)
class Manifest:
    records: tuple
    source_root: str = "."
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = {}
        for i, r in enumerate(self.records):
            if r.path in seen:
                raise ManifestError(f"duplicate path {r.path!r} (records {seen[r.path]} and {i})")
            seen[r.path] = i

    @property
    def class_count(self) -> int:
        return len({r.subject_id for r in self.records})

    def filter(self, modality: str | None = None, split: str | None = None) -> "Manifest":
        recs = self.records
        if modality is not None:
            recs = tuple(r for r in recs if r.modality == modality)
        if split is not None:
            recs = tuple(r for r in recs if r.split == split)
        return Manifest(recs, self.source_root, self.seed)

    def count(self, split: str) -> int:
        return sum(1 for r in self.records if r.split == split)


def scan_root(root: str | os.PathLike, modality: str = "touchless") -> Manifest:
    """Inventory a subject-per-directory tree into a manifest.

    Subject ids come from the trailing integer of each directory name;
    sample indices follow lexicographic file order inside the directory.
    Ordering of the result is (subject asc, sample asc) regardless of how
    the filesystem enumerates entries.
    """
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise ManifestError(f"{root}: not a directory")
    if modality not in MODALITIES:
        raise ManifestError(f"unknown modality {modality!r}")

    subjects = []
    for entry in sorted(os.listdir(root)):
        full = os.path.join(root, entry)
        if not os.path.isdir(full):
            continue
        m = _SUBJECT_DIR_RE.fullmatch(entry)
        if not m:
            raise ManifestError(f"{full}: cannot parse a subject id from directory name")
        subjects.append((int(m.group(1)), entry, full))
    subjects.sort(key=lambda t: t[0])

    records = []
    for subject_id, entry, full in subjects:
        files = sorted(
            f for f in os.listdir(full) if os.path.splitext(f)[1].lower() in _IMAGE_EXTS
        )
        if not files:
            log.warning("%s: empty subject directory", full)
            continue
        if len(files) > MAX_SAMPLES_PER_SUBJECT:
            raise ManifestError(
                f"{full}: {len(files)} images exceed the {MAX_SAMPLES_PER_SUBJECT}-sample layout"
            )
        for idx, fname in enumerate(files, start=1):
            records.append(
                SampleRecord(
                    path=f"{entry}/{fname}",
                    subject_id=subject_id,
                    sample_idx=idx,
                    modality=modality,
                )
            )
    return Manifest(tuple(records), source_root=root)


def assign_splits(manifest: Manifest, train_fraction: float, seed: int) -> Manifest:
    """Stratified per-subject split with a seeded deterministic shuffle.

    Within each subject the records are grouped by source sample (so
    augmented variants of one capture tend to travel together), the groups
    are shuffled, and the first round(train_fraction * k) records of the
    flattened order go to train. Only the boundary group can straddle the
    split; per-subject counts are exact.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ManifestError(f"train fraction must be in (0, 1), got {train_fraction}")

    by_subject: dict[int, list[SampleRecord]] = {}
    for r in manifest.records:
        by_subject.setdefault(r.subject_id, []).append(r)

    assignment: dict[str, str] = {}
    for subject_id in sorted(by_subject):
        recs = by_subject[subject_id]
        k = len(recs)
        if k == 1:
            log.warning("subject %d has a single record; assigning it to train", subject_id)
            assignment[recs[0].path] = "train"
            continue
        groups: dict[int, list[SampleRecord]] = {}
        for r in recs:
            groups.setdefault(r.sample_idx, []).append(r)
        ordered_groups = [groups[s] for s in sorted(groups)]
        rng = random.Random(f"{seed}:{subject_id}")
        rng.shuffle(ordered_groups)
        flat = [r for g in ordered_groups for r in g]
        n_train = int(train_fraction * k + 0.5)
        n_train = min(max(n_train, 1), k - 1)
        for i, r in enumerate(flat):
            assignment[r.path] = "train" if i < n_train else "test"

    new_records = tuple(replace(r, split=assignment[r.path]) for r in manifest.records)
    return Manifest(new_records, manifest.source_root, seed=seed)


def write_manifest(manifest: Manifest, path: str | os.PathLike) -> None:
    """Write the CSV contract atomically (temp file + rename)."""
    path = os.fspath(path)
    parent = os.path.dirname(path) or "."
    if not os.path.isdir(parent):
        raise ManifestError(f"{parent}: parent directory does not exist")
    lines = [MANIFEST_HEADER]
    for r in manifest.records:
        lines.append(f"{r.path},{r.subject_id},{r.sample_idx},{r.modality},{r.split}")
    data = "\n".join(lines) + "\n"
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".manifest-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(path: str | os.PathLike, source_root: str | None = None) -> Manifest:
    """Parse a manifest file; paths are taken relative to the file's directory
    unless source_root overrides it."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise ManifestError(f"{path}: no such file") from None
    if not lines or lines[0] != MANIFEST_HEADER:
        raise ManifestError(f"{path}: line 1: expected header {MANIFEST_HEADER!r}")

    records = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ManifestError(f"{path}: line {lineno}: expected 5 fields, got {len(parts)}")
        p, sid, sidx, modality, split = parts
        if p in seen:
            raise ManifestError(
                f"{path}: duplicate path {p!r} on lines {seen[p]} and {lineno}"
            )
        seen[p] = lineno
        try:
            record = SampleRecord(p, int(sid), int(sidx), modality, split)
        except ValueError:
            raise ManifestError(f"{path}: line {lineno}: non-integer id fields") from None
        except ManifestError as e:
            raise ManifestError(f"{path}: line {lineno}: {e}") from None
        records.append(record)

    root = source_root if source_root is not None else (os.path.dirname(path) or ".")
    return Manifest(tuple(records), source_root=root)
