import numpy as np
import pytest

from touchprint import (
    Image,
    Manifest,
    ManifestError,
    SampleRecord,
    assign_splits,
    read_manifest,
    save_image,
    scan_root,
    write_manifest,
)


def make_tree(tmp_path, subjects, samples, dirname=lambda i: str(i)):
    rng = np.random.default_rng(7)
    for sid in range(1, subjects + 1):
        d = tmp_path / dirname(sid)
        d.mkdir(parents=True)
        for idx in range(1, samples + 1):
            img = Image(rng.integers(0, 256, (8, 8), dtype=np.uint8))
            save_image(img, d / f"sample_{idx}.png")


def synthetic_manifest(subjects, samples, variants):
    recs = []
    for sid in range(1, subjects + 1):
        for idx in range(1, samples + 1):
            for v in range(variants):
                recs.append(SampleRecord(f"{sid}_{idx}_v{v}.png", sid, idx))
    return Manifest(tuple(recs), source_root=".")


# --- scan_root ---------------------------------------------------------------

def test_scan_counts(tmp_path):
    make_tree(tmp_path, subjects=3, samples=2)
    m = scan_root(tmp_path)
    assert len(m.records) == 6
    assert m.class_count == 3
    assert [r.subject_id for r in m.records] == [1, 1, 2, 2, 3, 3]
    assert [r.sample_idx for r in m.records] == [1, 2, 1, 2, 1, 2]


def test_scan_empty_root(tmp_path):
    m = scan_root(tmp_path)
    assert m.records == () and m.class_count == 0


def test_scan_prefixed_subject_dirs(tmp_path):
    make_tree(tmp_path, subjects=2, samples=1, dirname=lambda i: f"subject_{i:03d}")
    m = scan_root(tmp_path)
    assert [r.subject_id for r in m.records] == [1, 2]


def test_scan_unparsable_dir_fatal(tmp_path):
    (tmp_path / "notanumber").mkdir()
    with pytest.raises(ManifestError, match="notanumber"):
        scan_root(tmp_path)


def test_scan_empty_subject_warns(tmp_path, caplog):
    make_tree(tmp_path, subjects=1, samples=1)
    (tmp_path / "2").mkdir()
    m = scan_root(tmp_path)
    assert len(m.records) == 1
    assert any("empty subject" in r.message for r in caplog.records)


def test_scan_too_many_samples_fatal(tmp_path):
    make_tree(tmp_path, subjects=1, samples=5)
    with pytest.raises(ManifestError, match="exceed"):
        scan_root(tmp_path)


def test_scan_order_independent_of_fs(tmp_path):
    make_tree(tmp_path, subjects=5, samples=2)
    a = scan_root(tmp_path)
    b = scan_root(tmp_path)
    assert a.records == b.records


# --- assign_splits -------------------------------------------------------------

def test_split_direct_counts():
    m = synthetic_manifest(subjects=200, samples=4, variants=6)
    out = assign_splits(m, 2 / 3, seed=7)
    assert out.count("train") == 3200
    assert out.count("test") == 1600


def test_split_indirect_counts():
    m = synthetic_manifest(subjects=200, samples=4, variants=3)
    out = assign_splits(m, 3 / 4, seed=7)
    assert out.count("train") == 1800
    assert out.count("test") == 600


def test_split_stratified_per_subject():
    m = synthetic_manifest(subjects=10, samples=4, variants=6)
    out = assign_splits(m, 2 / 3, seed=3)
    for sid in range(1, 11):
        recs = [r for r in out.records if r.subject_id == sid]
        assert sum(r.split == "train" for r in recs) == 16
        assert sum(r.split == "test" for r in recs) == 8


def test_split_is_partition():
    m = synthetic_manifest(subjects=7, samples=3, variants=2)
    out = assign_splits(m, 0.5, seed=1)
    assert all(r.split in ("train", "test") for r in out.records)
    assert len(out.records) == len(m.records)


def test_split_deterministic_and_seed_sensitive():
    m = synthetic_manifest(subjects=20, samples=4, variants=2)
    a = assign_splits(m, 0.5, seed=11)
    b = assign_splits(m, 0.5, seed=11)
    c = assign_splits(m, 0.5, seed=12)
    assert [r.split for r in a.records] == [r.split for r in b.records]
    assert [r.split for r in a.records] != [r.split for r in c.records]


def test_split_every_subject_in_both():
    m = synthetic_manifest(subjects=9, samples=2, variants=1)
    out = assign_splits(m, 0.9, seed=0)
    for sid in range(1, 10):
        splits = {r.split for r in out.records if r.subject_id == sid}
        assert splits == {"train", "test"}


def test_split_single_record_subject_warns(caplog):
    m = Manifest((SampleRecord("a.png", 1, 1), SampleRecord("b.png", 2, 1), SampleRecord("c.png", 2, 2)))
    out = assign_splits(m, 0.5, seed=0)
    assert out.records[0].split == "train"
    assert any("single record" in r.message for r in caplog.records)


def test_split_bad_fraction():
    m = synthetic_manifest(2, 2, 1)
    for f in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ManifestError):
            assign_splits(m, f, seed=0)


def test_split_variant_grouping_mostly_cohesive():
    # at most one sample group per subject straddles the boundary
    m = synthetic_manifest(subjects=12, samples=4, variants=3)
    out = assign_splits(m, 3 / 4, seed=5)
    for sid in range(1, 13):
        straddling = 0
        for idx in range(1, 5):
            splits = {r.split for r in out.records if r.subject_id == sid and r.sample_idx == idx}
            if len(splits) > 1:
                straddling += 1
        assert straddling <= 1


# --- manifest files -------------------------------------------------------------

def test_manifest_round_trip(tmp_path):
    m = synthetic_manifest(subjects=3, samples=2, variants=2)
    m = assign_splits(m, 0.5, seed=4)
    path = tmp_path / "manifest.csv"
    write_manifest(m, path)
    back = read_manifest(path)
    assert back.records == m.records
    assert back.class_count == m.class_count


def test_manifest_file_format(tmp_path):
    m = Manifest((SampleRecord("1/a.png", 1, 1, "touchless", "train"),))
    path = tmp_path / "m.csv"
    write_manifest(m, path)
    data = path.read_bytes()
    assert data == b"path,subject_id,sample_idx,modality,split\n1/a.png,1,1,touchless,train\n"


def test_empty_manifest_round_trip(tmp_path):
    path = tmp_path / "m.csv"
    write_manifest(Manifest(()), path)
    assert read_manifest(path).records == ()


def test_duplicate_paths_named_with_lines(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(
        "path,subject_id,sample_idx,modality,split\n"
        "a.png,1,1,touchless,train\n"
        "a.png,1,2,touchless,train\n"
    )
    with pytest.raises(ManifestError, match=r"lines 2 and 3"):
        read_manifest(path)


def test_malformed_line_number_reported(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text(
        "path,subject_id,sample_idx,modality,split\n"
        "a.png,1,1,touchless,train\n"
        "b.png,oops,1,touchless,train\n"
    )
    with pytest.raises(ManifestError, match="line 3"):
        read_manifest(path)


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("path,subject,modality\n")
    with pytest.raises(ManifestError, match="line 1"):
        read_manifest(path)


def test_duplicate_record_paths_rejected_in_memory():
    with pytest.raises(ManifestError, match="duplicate path"):
        Manifest((SampleRecord("a.png", 1, 1), SampleRecord("a.png", 2, 1)))


def test_record_validation():
    with pytest.raises(ManifestError):
        SampleRecord("", 1, 1)
    with pytest.raises(ManifestError):
        SampleRecord("a.png", 0, 1)
    with pytest.raises(ManifestError):
        SampleRecord("a.png", 1, 5)
    with pytest.raises(ManifestError):
        SampleRecord("a.png", 1, 1, "sonar")
    with pytest.raises(ManifestError):
        SampleRecord("a.png", 1, 1, "touchless", "maybe")
