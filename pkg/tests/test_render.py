import synth
from ixtrace.engine import detect_path
from ixtrace.model import TraceroutePath
from ixtrace.render import annotate, crossing_after_hop, path_json


def _render(world, p):
    d, idx = world
    dets = detect_path(idx, d, p)
    return dets, annotate(p, dets, idx.resolve_many([h.address for h in p.hops]), d)


def test_no_detections_plain_listing(world):
    p = TraceroutePath.from_addresses("c", ["41.0.0.1", None, "10.0.0.1", "99.0.0.1"])
    dets, text = _render(world, p)
    assert dets == []
    assert text.splitlines() == [
        "path c",
        " 1  41.0.0.1  *  (AS64801)",
        " 2  *  *  (?)",
        " 3  10.0.0.1  *  (reserved)",
        " 4  99.0.0.1  *  (?)",
    ]


def test_r1_1_annotation_between_hops_5_and_6(world):
    dets, text = _render(world, synth.planted_r1_1_path())
    lines = text.splitlines()
    i = next(n for n, ln in enumerate(lines) if ln.startswith("==="))
    assert lines[i - 1].startswith(" 5  ") and lines[i + 1].startswith(" 6  ")
    assert sum(ln.startswith("===") for ln in lines) == len(dets) == 1


def test_every_detection_rendered_once_at_its_link(world):
    paths, _ = synth.planted_corpus(200, seed=11)
    d, idx = world
    for p in paths:
        dets, text = _render(world, p)
        lines = text.splitlines()
        marks = [n for n, ln in enumerate(lines) if ln.startswith("===")]
        assert len(marks) == len(dets)
        hop_before = []
        for n in marks:
            prev = [ln for ln in lines[1:n] if not ln.startswith("===")]
            hop_before.append(len(prev))
        assert sorted(hop_before) == sorted(crossing_after_hop(x) for x in dets)
        weak = sum("possible IXP crossing" in ln for ln in lines)
        assert weak == sum(x.strength.value == "WEAK" for x in dets)
        assert all(("ambiguous link" in lines[n]) == (dets_by_line(dets, lines[n])) for n in marks)


def dets_by_line(dets, line):
    rule = line.split("rule ")[1].split(",")[0]
    return next(x for x in dets if x.rule_id.value == rule).crossed_link.value == "A_OR_B"


def test_json_shape(world):
    d, idx = world
    p = synth.planted_r1_1_path()
    dets = detect_path(idx, d, p)
    obj = path_json(p, dets, idx.resolve_many([h.address for h in p.hops]), d)
    assert obj["detections"][0] == {
        "window_start": 5, "ixp_hop": 6, "rule_id": "R1_1", "link": "A", "strength": "STRONG",
        "ixp_id": "exchange-x", "ixp_name": "Exchange X",
    }
    assert obj["hops"][5]["asns"] == [64602]
