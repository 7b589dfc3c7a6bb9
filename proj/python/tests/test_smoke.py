import json

import flowlet

SPEC = {
    "name": "smoke",
    "table": "flowlet://bucket/table",
    "log": "flowlet://bucket/log",
    "timeout": 60,
    "input_format": "new_line",
    "stages": [
        {"kind": "split", "params": {"split_size": 64}},
        {"kind": "run", "params": {"application": "toy_compress"}},
        {"kind": "combine", "params": {}},
    ],
}

INPUT = b"".join(b"%d aaaabbbbcccc\n" % i for i in range(40))


def test_compile_is_canonical():
    once = flowlet.compile_pipeline(json.dumps(SPEC))
    twice = flowlet.compile_pipeline(json.dumps(SPEC))
    assert once == twice
    doc = json.loads(once)
    assert doc["name"] == "smoke"
    assert [s["kind"] for s in doc["stages"]] == ["split", "run", "combine"]


def test_compile_rejects_empty():
    bad = dict(SPEC, stages=[])
    try:
        flowlet.compile_pipeline(json.dumps(bad))
    except ValueError as e:
        assert "EmptyPipeline" in str(e)
    else:
        raise AssertionError("empty pipeline compiled")


def test_split_combine_roundtrip():
    chunks = flowlet.split(INPUT, 100)
    assert len(chunks) > 1
    assert flowlet.combine(chunks) == INPUT


def test_rle_roundtrip():
    blob = b"aaaabbbcddddd"
    assert flowlet.rle_decode(flowlet.rle_encode(blob)) == blob


def test_local_matches_simulated():
    compiled = flowlet.compile_pipeline(json.dumps(SPEC))
    local = flowlet.run_local(compiled, INPUT)
    sim = flowlet.simulate(compiled, INPUT, seed=7)
    assert sim["state"] == "done"
    assert sim["respawns"] == 0
    assert local == sim["outputs"]


def test_arrival_times_uniform():
    wl = {
        "kind": "uniform",
        "interval_s": 10,
        "duration_s": 600,
        "job": {"pipeline": "p.json", "input_bytes": 1000},
    }
    times = flowlet.arrival_times(json.dumps(wl))
    assert len(times) == 60
    assert times[0] == 0 and times[-1] == 590000


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print(name, "ok")
