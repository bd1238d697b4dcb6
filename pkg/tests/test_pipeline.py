import io

import numpy as np
from PIL import Image

from sheetmidi import bootleg as bs
from sheetmidi.pipeline import NO_MATCH, STAGES, match_features, run_query


def png(arr):
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def test_stage_names():
    assert STAGES == ("Load MIDI Bootleg Score", "Pre-Processing", "Notehead Detection", "Staff Line Features",
                      "Bar Line Features", "Query Bootleg Projection", "Subsequence DTW")


def test_blank_image_is_no_match(fixture_suite):
    _, _, bootlegs = fixture_suite
    res = run_query(png(np.full((600, 800), 255, np.uint8)), bootlegs[0])
    assert res.interval == NO_MATCH and res.interval.duration == 0
    assert not res.matched and res.extraction.failure
    assert bs.deserialize(res.features).width == 0
    assert set(res.timings) == set(STAGES)


def test_tiny_image_is_no_match(fixture_suite):
    _, _, bootlegs = fixture_suite
    res = run_query(png(np.zeros((20, 20), np.uint8)), bootlegs[0])
    assert res.interval == NO_MATCH


def test_single_query_end_to_end(fixture_suite):
    pieces, queries, bootlegs = fixture_suite
    q = queries[0]
    res = run_query(q.fixture.jpeg_bytes(), pieces[q.piece_index].midi_bytes())
    assert res.matched
    ov = max(0.0, min(res.interval.end, q.interval.end) - max(res.interval.start, q.interval.start))
    p, r = ov / res.interval.duration, ov / q.interval.duration
    assert 2 * p * r / (p + r) >= 0.95
    assert all(res.timings[s] >= 0 for s in STAGES) and res.timings["Subsequence DTW"] > 0
    # the serialized features reproduce the same match
    assert match_features(res.features, bootlegs[q.piece_index]).interval == res.interval
