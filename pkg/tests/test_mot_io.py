import numpy as np
import pytest

from ratemot.mot_io import (
    BoundingBox,
    GtEntry,
    ParseError,
    Sequence,
    TrackResult,
    ValidationError,
    fmt_num,
    load_sequence,
    parse_det,
    parse_gt,
    parse_results,
    read_info,
    save_sequence,
    sequence_stats,
    write_det,
    write_gt,
    write_info,
    write_results,
)

GT_SAMPLE = """\
1,1,10,20,30,40,1,1,1
1,2,100,120,25,50,1,1,1
2,1,12,22,30,40,1,1,1
"""


def test_parse_gt_basic():
    entries = parse_gt(GT_SAMPLE)
    assert len(entries) == 3
    first = entries[0]
    assert first.frame == 1 and first.identity == 1
    assert first.box == BoundingBox(10, 20, 30, 40)
    assert first.visibility_flag == 1


def test_parse_gt_sorted_output():
    shuffled = "2,1,0,0,5,5,1,1,1\n1,2,0,0,5,5,1,1,1\n1,1,0,0,5,5,1,1,1\n"
    entries = parse_gt(shuffled)
    keys = [(e.frame, e.identity) for e in entries]
    assert keys == sorted(keys)


def test_parse_gt_skips_zero_conf_rows():
    text = "1,1,0,0,5,5,0,1,1\n1,2,0,0,5,5,1,1,1\n"
    assert len(parse_gt(text)) == 1
    assert len(parse_gt(text, include_zero_conf=True)) == 2


def test_parse_gt_rejects_duplicates():
    text = "1,1,0,0,5,5,1,1,1\n1,1,9,9,5,5,1,1,1\n"
    with pytest.raises(ValidationError):
        parse_gt(text)


def test_parse_gt_rejects_bad_sizes():
    with pytest.raises(ValidationError):
        parse_gt("1,1,0,0,0,5,1,1,1\n")
    with pytest.raises(ValidationError):
        parse_gt("1,1,0,0,5,-2,1,1,1\n")


def test_parse_gt_rejects_short_rows():
    with pytest.raises(ParseError):
        parse_gt("1,1,0,0,5\n")
    with pytest.raises(ParseError):
        parse_gt("1,1,a,0,5,5,1,1,1\n")


def test_gt_round_trip():
    entries = parse_gt(GT_SAMPLE)
    assert parse_gt(write_gt(entries)) == entries


def test_visibility_parsed_as_flag():
    text = "1,1,0,0,5,5,1,1,0.75\n1,2,0,0,5,5,1,1,0\n"
    entries = parse_gt(text)
    assert entries[0].visibility_flag == 1
    assert entries[1].visibility_flag == 0


def test_fmt_num():
    assert fmt_num(1.0) == "1"
    assert fmt_num(1.5) == "1.5"
    assert fmt_num(0.123456789) == "0.123457"
    assert fmt_num(-0.0000001) == "0"
    assert fmt_num(-3.25) == "-3.25"


def test_det_round_trip():
    frames = {
        1: [(BoundingBox(1, 2, 3, 4), 0.9), (BoundingBox(5, 6, 7, 8), 0.4)],
        3: [(BoundingBox(2, 2, 2, 2), 1.0)],
    }
    text = write_det(frames)
    for line in text.splitlines():
        assert line.split(",")[1] == "-1"
    parsed = parse_det(text)
    assert sorted(parsed) == [1, 3]
    assert len(parsed[1]) == 2
    assert parsed[1][0][0] == BoundingBox(1, 2, 3, 4)
    assert parsed[1][0][1] == pytest.approx(0.9)


def test_results_round_trip_and_order():
    result = TrackResult()
    result.add(2, 7, BoundingBox(0, 0, 10, 10), 0.5)
    result.add(1, 3, BoundingBox(5, 5, 8, 8), 0.25)
    result.add(1, 1, BoundingBox(1, 1, 2, 2), 1.0)
    text = write_results(result)
    lines = text.strip().splitlines()
    assert lines[0].startswith("1,1,")
    assert lines[1].startswith("1,3,")
    assert lines[2].startswith("2,7,")
    assert all(line.endswith(",-1,-1,-1") for line in lines)

    back = parse_results(text)
    assert len(back.rows) == 3


def test_results_reject_duplicate_identity_per_frame():
    result = TrackResult()
    result.add(1, 1, BoundingBox(0, 0, 5, 5), 1.0)
    result.add(1, 1, BoundingBox(9, 9, 5, 5), 1.0)
    with pytest.raises(ValidationError):
        result.validate()


def test_results_reject_non_finite():
    result = TrackResult()
    result.add(1, 1, BoundingBox(0, 0, np.inf, 5), 1.0)
    with pytest.raises(ValidationError):
        result.validate()


def test_info_round_trip():
    info = {"name": "seq", "fps": 12.5, "width": 640, "height": 480, "length": 9}
    back = read_info(write_info(info))
    assert back == info
    assert isinstance(back["width"], int)
    assert isinstance(back["fps"], float)


def test_info_rejects_garbage():
    with pytest.raises(ParseError):
        read_info("not a pair\n")


def test_sequence_save_load(tmp_path):
    entries = parse_gt(GT_SAMPLE)
    seq = Sequence(name="demo", fps=25.0, width=640, height=480, length=4, gt=entries)
    save_sequence(tmp_path, seq, extra={"k": 2, "offset": 1})
    assert (tmp_path / "demo" / "seqinfo.txt").is_file()
    assert (tmp_path / "demo" / "gt" / "gt.txt").is_file()

    back = load_sequence(tmp_path / "demo")
    assert back.name == seq.name
    assert back.fps == seq.fps
    assert back.length == 4
    assert back.gt == entries
    assert sequence_stats(back) == (4, 2)


def test_load_sequence_missing_info(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(ParseError):
        load_sequence(tmp_path / "empty")


def test_gt_by_frame_groups():
    seq = Sequence(
        name="s", fps=30.0, width=100, height=100, length=2, gt=parse_gt(GT_SAMPLE)
    )
    grouped = seq.gt_by_frame()
    assert sorted(grouped) == [1, 2]
    assert len(grouped[1]) == 2
    assert seq.identities() == {1, 2}
