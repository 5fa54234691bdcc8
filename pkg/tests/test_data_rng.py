"""Containers, disk round-trips, and derived random streams."""

import numpy as np
import pytest

from errdecode.data import (
    CLASS_NAMES,
    CORRECT,
    ERROR,
    ChannelMeta,
    EpochSet,
    EventMarker,
    Recording,
    class_index,
    load_recording,
    save_recording,
    write_json,
)
from errdecode.errors import DataError
from errdecode.rng import derive_rng, derive_seedseq


def _channels(n):
    return [
        ChannelMeta(f"A{i + 1}", "A", i, (float(i), 0.0, 0.0), None)
        for i in range(n)
    ]


class TestLabels:
    def test_index_order(self):
        assert CLASS_NAMES == ("correct", "error")
        assert class_index("correct") == CORRECT == 0
        assert class_index("error") == ERROR == 1

    def test_unknown_label(self):
        with pytest.raises(DataError):
            class_index("oops")


class TestRecording:
    def test_properties(self):
        rec = Recording(np.zeros((2, 500)), 250.0, _channels(2))
        assert rec.n_channels == 2
        assert rec.n_samples == 500
        assert rec.duration_s == pytest.approx(2.0)

    def test_channel_count_checked(self):
        with pytest.raises(DataError):
            Recording(np.zeros((3, 10)), 250.0, _channels(2))

    def test_event_times_must_increase(self):
        with pytest.raises(DataError):
            Recording(
                np.zeros((1, 500)),
                250.0,
                _channels(1),
                [EventMarker(1.0, "error"), EventMarker(1.0, "correct")],
            )

    def test_event_beyond_duration(self):
        with pytest.raises(DataError):
            Recording(
                np.zeros((1, 500)), 250.0, _channels(1), [EventMarker(2.5, "error")]
            )

    def test_with_data_replaces_signal(self):
        rec = Recording(np.zeros((2, 10)), 250.0, _channels(2))
        rec2 = rec.with_data(np.ones((2, 10)))
        assert rec2.data.sum() == 20
        assert rec2.channels == rec.channels


class TestEpochSet:
    def _epochs(self):
        return EpochSet(
            tensor=np.zeros((5, 2, 500)),
            labels=np.array([0, 1, 0, 1, 0]),
            onsets_s=np.arange(5) * 3.0,
            window_s=(-0.5, 1.5),
            rate_hz=250.0,
            channels=_channels(2),
        )

    def test_length_must_match_window(self):
        with pytest.raises(DataError):
            EpochSet(
                tensor=np.zeros((2, 1, 499)),
                labels=np.array([0, 1]),
                onsets_s=np.array([0.0, 3.0]),
                window_s=(-0.5, 1.5),
                rate_hz=250.0,
            )

    def test_class_counts(self):
        assert self._epochs().class_counts() == {"correct": 3, "error": 2}

    def test_select_keeps_alignment(self):
        sub = self._epochs().select(np.array([1, 3]))
        assert sub.n_trials == 2
        assert list(sub.labels) == [1, 1]
        assert list(sub.onsets_s) == [3.0, 9.0]

    def test_narrow_channel(self):
        ep = self._epochs()
        one = ep.narrow_channel(1)
        assert one.n_channels == 1
        assert one.channels[0].name == "A2"
        with pytest.raises(DataError):
            ep.narrow_channel(2)


class TestRecordingIO:
    def test_roundtrip(self, tmp_path):
        rng = derive_rng(0)
        rec = Recording(
            data=rng.standard_normal((3, 100)),
            rate_hz=250.0,
            channels=[
                ChannelMeta("A1", "A", 0, (1.0, 2.0, 3.0), "hippocampus"),
                ChannelMeta("A2", "A", 1, (4.0, 5.0, 6.0), None),
                ChannelMeta("B1", "B", 0, (7.0, 8.0, 9.0), None),
            ],
            events=[EventMarker(0.1, "correct"), EventMarker(0.25, "error")],
        )
        save_recording(rec, tmp_path)
        back = load_recording(tmp_path)
        # storage is float32, so compare at that precision
        assert np.allclose(back.data, rec.data, atol=1e-6)
        assert back.rate_hz == 250.0
        assert back.channels == rec.channels
        assert back.events == rec.events

    def test_missing_files(self, tmp_path):
        with pytest.raises(DataError):
            load_recording(tmp_path)

    def test_truncated_signal(self, tmp_path):
        rec = Recording(np.zeros((2, 10)), 250.0, _channels(2))
        save_recording(rec, tmp_path)
        blob = (tmp_path / "signal.bin").read_bytes()
        (tmp_path / "signal.bin").write_bytes(blob[:-4])
        with pytest.raises(DataError):
            load_recording(tmp_path)

    def test_sample_count_checked(self, tmp_path):
        rec = Recording(np.zeros((2, 10)), 250.0, _channels(2))
        save_recording(rec, tmp_path)
        # drop one full sample per channel: still divisible, count mismatch
        data = np.zeros((2, 9), dtype="<f4")
        data.tofile(tmp_path / "signal.bin")
        with pytest.raises(DataError):
            load_recording(tmp_path)


class TestWriteJson:
    def test_stable_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_json(a, {"b": 1, "a": [1, 2]})
        write_json(b, {"a": [1, 2], "b": 1})
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().endswith("\n")


class TestDerivedStreams:
    def test_same_path_same_stream(self):
        a = derive_rng(0, "train", 3).standard_normal(8)
        b = derive_rng(0, "train", 3).standard_normal(8)
        assert np.array_equal(a, b)

    def test_distinct_paths_distinct_streams(self):
        draws = {
            name: derive_rng(0, *path).standard_normal(4).tobytes()
            for name, path in {
                "a": ("train", 3),
                "b": ("train", 4),
                "c": ("eval", 3),
                "d": (3, "train"),
            }.items()
        }
        assert len(set(draws.values())) == 4

    def test_seed_changes_stream(self):
        a = derive_rng(0, "x").standard_normal(4)
        b = derive_rng(1, "x").standard_normal(4)
        assert not np.array_equal(a, b)

    def test_seedseq_spawn_key_stable(self):
        assert (
            derive_seedseq(5, "perm", 2).spawn_key
            == derive_seedseq(5, "perm", 2).spawn_key
        )

    def test_negative_component_rejected(self):
        with pytest.raises(ValueError):
            derive_rng(0, -1)

    def test_unsupported_component_type(self):
        with pytest.raises(TypeError):
            derive_rng(0, 1.5)
