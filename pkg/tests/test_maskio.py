import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carcino import maskio
from carcino.core import Indication
from carcino.errors import (
    BadMagicError,
    ChannelCountMismatchError,
    ConfidenceOutOfRangeError,
    DimensionMismatchError,
    GroundTruthInconsistentError,
    LabelOutOfRangeError,
    ManifestError,
    ManifestSyntaxError,
    MaskFormatError,
    MissingFieldError,
    RasterInvariantError,
    TruncatedPayloadError,
    UnknownDtypeError,
)

from conftest import ground_truth_for, write_video


# --- raster container ----------------------------------------------------


def test_header_is_14_bytes_and_payload_exact(tmp_path):
    arr = np.array([[[0, 1], [1, 0]]], dtype=np.uint8)  # 2x2, 1 channel
    path = tmp_path / "a.msk"
    written = maskio.write_raster(arr, path)
    assert maskio.HEADER_SIZE == 14
    assert written == 14 + 4
    assert path.stat().st_size == 18


def test_roundtrip_label_and_confidence(tmp_path):
    label = np.arange(9, dtype=np.uint8).reshape(1, 3, 3) % 9
    conf = np.linspace(0, 1, 2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4)
    for arr, name in ((label, "l.msk"), (conf, "c.msk")):
        path = tmp_path / name
        maskio.write_raster(arr, path)
        back = maskio.read_raster(path)
        assert back.dtype == arr.dtype
        assert back.shape == arr.shape
        assert np.array_equal(back, arr)


@settings(max_examples=60, deadline=None)
@given(
    channels=st.integers(1, 9),
    height=st.integers(1, 12),
    width=st.integers(1, 12),
    kind=st.sampled_from(["label", "conf"]),
    seed=st.integers(0, 2**31 - 1),
)
def test_roundtrip_is_identity_on_random_rasters(channels, height, width, kind, seed):
    rng = np.random.default_rng(seed)
    if kind == "label":
        arr = rng.integers(0, 9, size=(channels, height, width), dtype=np.uint8)
    else:
        arr = rng.random((channels, height, width), dtype=np.float32)
    blob = maskio.encode_raster(arr)
    back = maskio.decode_raster(blob)
    assert np.array_equal(back, arr) and back.dtype == arr.dtype
    # a second encode is bitwise identical
    assert maskio.encode_raster(back) == blob


def test_read_from_stream_and_bytes(tmp_path):
    arr = np.zeros((1, 2, 2), dtype=np.uint8)
    blob = maskio.encode_raster(arr)
    assert np.array_equal(maskio.read_raster(blob), arr)
    assert np.array_equal(maskio.read_raster(io.BytesIO(blob)), arr)


def test_bad_magic_rejected():
    arr = np.zeros((1, 2, 2), dtype=np.uint8)
    blob = b"MSK2" + maskio.encode_raster(arr)[4:]
    with pytest.raises(BadMagicError):
        maskio.read_raster(blob)


def test_unknown_dtype_rejected():
    arr = np.zeros((1, 2, 2), dtype=np.uint8)
    blob = bytearray(maskio.encode_raster(arr))
    blob[13] = 7
    with pytest.raises(UnknownDtypeError):
        maskio.read_raster(bytes(blob))


def test_truncated_payload_rejected():
    arr = np.zeros((1, 4, 4), dtype=np.uint8)
    blob = maskio.encode_raster(arr)
    with pytest.raises(TruncatedPayloadError):
        maskio.read_raster(blob[:-3])
    with pytest.raises(TruncatedPayloadError):
        maskio.read_raster(blob[:10])  # shorter than the header


def test_trailing_bytes_rejected():
    arr = np.zeros((1, 2, 2), dtype=np.uint8)
    with pytest.raises(MaskFormatError):
        maskio.read_raster(maskio.encode_raster(arr) + b"\x00")


def test_confidence_out_of_range_rejected_on_read():
    arr = np.full((1, 2, 2), 0.5, dtype=np.float32)
    blob = bytearray(maskio.encode_raster(arr))
    bad = np.array([1.5], dtype="<f4").tobytes()
    blob[maskio.HEADER_SIZE : maskio.HEADER_SIZE + 4] = bad
    with pytest.raises(ConfidenceOutOfRangeError):
        maskio.read_raster(bytes(blob))
    blob[maskio.HEADER_SIZE : maskio.HEADER_SIZE + 4] = np.array(
        [np.nan], dtype="<f4"
    ).tobytes()
    with pytest.raises(ConfidenceOutOfRangeError):
        maskio.read_raster(bytes(blob))


def test_label_out_of_range_rejected_both_ways(tmp_path):
    arr = np.full((1, 2, 2), 9, dtype=np.uint8)
    path = tmp_path / "bad.msk"
    with pytest.raises(LabelOutOfRangeError):
        maskio.write_raster(arr, path)
    assert not path.exists()  # rejected before writing
    good = np.zeros((1, 2, 2), dtype=np.uint8)
    blob = bytearray(maskio.encode_raster(good))
    blob[maskio.HEADER_SIZE] = 9
    with pytest.raises(LabelOutOfRangeError):
        maskio.read_raster(bytes(blob))


def test_invalid_rasters_rejected_nothing_written(tmp_path):
    path = tmp_path / "never.msk"
    with pytest.raises(RasterInvariantError):
        maskio.write_raster(np.zeros((2, 2), dtype=np.uint8), path)  # not 3-D
    with pytest.raises(RasterInvariantError):
        maskio.write_raster(np.zeros((1, 2, 2), dtype=np.float64), path)
    with pytest.raises(ConfidenceOutOfRangeError):
        maskio.write_raster(np.full((1, 2, 2), 1.5, dtype=np.float32), path)
    assert not path.exists()


def test_raster_path_appears_in_error_message(tmp_path):
    path = tmp_path / "corrupt.msk"
    path.write_bytes(b"MSK2" + b"\x00" * 20)
    with pytest.raises(BadMagicError) as excinfo:
        maskio.read_raster(path)
    assert str(path) in str(excinfo.value)


# --- manifests -------------------------------------------------------------


def _minimal_manifest(gt=None):
    data = {
        "video_id": "v1",
        "frames": [
            {
                "frame_index": 0,
                "time_s": 0.0,
                "organ_conf": "f0.organ.msk",
                "pc_conf": "f0.pc.msk",
                "roi_score": 0.9,
            }
        ],
    }
    if gt is not None:
        data["ground_truth"] = gt
    return data


def _gt_dict(flags, fs, its):
    slugs = [
        "diaphragm",
        "liver",
        "stomach_spleen_lesser_omentum",
        "greater_omentum",
        "parietal_peritoneum",
        "bowel",
    ]
    return {"stations": dict(zip(slugs, flags)), "fs": fs, "its": its}


def test_manifest_accepts_consistent_ground_truth(tmp_path):
    gt = _gt_dict([True, False, False, False, False, False], 2, "SurgeryIndicated")
    path = tmp_path / "m.json"
    path.write_text(json.dumps(_minimal_manifest(gt)))
    manifest = maskio.load_manifest(path)
    assert manifest.ground_truth.fs == 2
    assert manifest.ground_truth.its is Indication.SURGERY_INDICATED
    assert manifest.base_dir == tmp_path


def test_manifest_rejects_fs_station_mismatch(tmp_path):
    gt = _gt_dict([True, False, False, False, False, False], 4, "SurgeryIndicated")
    path = tmp_path / "m.json"
    path.write_text(json.dumps(_minimal_manifest(gt)))
    with pytest.raises(GroundTruthInconsistentError):
        maskio.load_manifest(path)


def test_manifest_rejects_its_fs_mismatch(tmp_path):
    gt = _gt_dict([True, True, True, True, False, False], 8, "SurgeryIndicated")
    path = tmp_path / "m.json"
    path.write_text(json.dumps(_minimal_manifest(gt)))
    with pytest.raises(GroundTruthInconsistentError):
        maskio.load_manifest(path)


def test_manifest_rejects_bad_json(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(ManifestSyntaxError):
        maskio.load_manifest(path)


def test_manifest_rejects_missing_fields(tmp_path):
    data = _minimal_manifest()
    del data["frames"][0]["pc_conf"]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    with pytest.raises(MissingFieldError):
        maskio.load_manifest(path)
    path.write_text(json.dumps({"frames": []}))
    with pytest.raises(MissingFieldError):
        maskio.load_manifest(path)


def test_manifest_rejects_unordered_frames(tmp_path):
    data = _minimal_manifest()
    second = dict(data["frames"][0])
    second["frame_index"] = 0  # not strictly increasing
    data["frames"].append(second)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ManifestError):
        maskio.load_manifest(path)
    data["frames"][1]["frame_index"] = 1
    data["frames"][1]["time_s"] = -1.0  # time goes backwards
    path.write_text(json.dumps(data))
    with pytest.raises(ManifestError):
        maskio.load_manifest(path)


def test_manifest_rejects_roi_score_out_of_range(tmp_path):
    data = _minimal_manifest()
    data["frames"][0]["roi_score"] = 1.5
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ManifestError):
        maskio.load_manifest(path)


def test_manifest_save_load_roundtrip(tmp_path):
    manifest = write_video(
        tmp_path,
        "vid",
        [
            {
                "organ_conf": np.full((8, 4, 4), 0.2, dtype=np.float32),
                "pc_conf": np.zeros((4, 4), dtype=np.float32),
                "gt_labels": np.zeros((4, 4), dtype=np.uint8),
                "gt_pc": np.zeros((4, 4), dtype=np.uint8),
                "gt_roi": True,
            }
        ],
        ground_truth=ground_truth_for((False,) * 6),
    )
    again = maskio.load_manifest(manifest.base_dir / "manifest.json")
    assert maskio.manifest_to_dict(again) == maskio.manifest_to_dict(manifest)


def test_load_frame_checks_dimensions_and_channels(tmp_path):
    video_dir = tmp_path / "v"
    video_dir.mkdir()
    maskio.write_raster(np.zeros((8, 4, 4), dtype=np.float32), video_dir / "organ.msk")
    maskio.write_raster(np.zeros((1, 5, 5), dtype=np.float32), video_dir / "pc_bad.msk")
    maskio.write_raster(np.zeros((1, 4, 4), dtype=np.float32), video_dir / "pc.msk")
    maskio.write_raster(np.zeros((7, 4, 4), dtype=np.float32), video_dir / "organ7.msk")
    rec = maskio.FrameRecord(0, 0.0, "organ.msk", "pc_bad.msk", 1.0)
    with pytest.raises(DimensionMismatchError):
        maskio.load_frame(rec, video_dir)
    rec = maskio.FrameRecord(0, 0.0, "organ7.msk", "pc.msk", 1.0)
    with pytest.raises(ChannelCountMismatchError):
        maskio.load_frame(rec, video_dir)
    rec = maskio.FrameRecord(0, 0.0, "organ.msk", "pc.msk", 1.0)
    frame = maskio.load_frame(rec, video_dir)
    assert frame.organ_conf.shape == (8, 4, 4)
    assert frame.pc_conf.shape == (4, 4)


def test_load_frame_rejects_nonbinary_gt_pc(tmp_path):
    video_dir = tmp_path / "v"
    video_dir.mkdir()
    maskio.write_raster(np.zeros((8, 4, 4), dtype=np.float32), video_dir / "organ.msk")
    maskio.write_raster(np.zeros((1, 4, 4), dtype=np.float32), video_dir / "pc.msk")
    maskio.write_raster(np.full((1, 4, 4), 2, dtype=np.uint8), video_dir / "gtpc.msk")
    rec = maskio.FrameRecord(0, 0.0, "organ.msk", "pc.msk", 1.0, gt_pc="gtpc.msk")
    with pytest.raises(LabelOutOfRangeError):
        maskio.load_frame(rec, video_dir)
