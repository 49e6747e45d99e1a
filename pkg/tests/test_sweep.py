from btdsim.config import parse_scenario
from btdsim.sweep import COLUMNS, load_trace, emit_trace, run_sweep
from btdsim.sim.scenario import run_scenario

SMALL = """\
[topology]
road_width = 20
road_length = 140
theta = 50
phi = 30

[obstacle]
mode = grid
x_range = 40 70
y_range = 0 20
step = 2
radii = 0.5 2
"""


def test_cache_does_not_change_the_report():
    sf = parse_scenario(SMALL)
    cached = run_sweep(sf)
    fresh = run_sweep(sf, cache=False)
    assert cached.table() == fresh.table()
    assert len(cached.cells) == 16 * 11 * 2


def test_report_contents():
    report = run_sweep(parse_scenario(SMALL))
    header, *rows = report.table().splitlines()
    assert header.split("\t") == list(COLUMNS)
    assert len(rows) == len(report.cells)
    hist = report.histogram()
    assert sum(hist.values()) == len(report.blockage_cells())
    assert set(hist) <= {"I", "II", "III", "IV", "mixed"}
    assert report.single_type_agreement == 1.0
    assert "agreement rate: " in report.summary()


def test_trace_file_round_trip(tmp_path):
    sf = parse_scenario(SMALL)
    _, trace = run_scenario(sf.topology, sf.obstacles()[40])
    path = emit_trace(trace, str(tmp_path / "deep" / "t.tsv"))
    assert load_trace(path) == trace
