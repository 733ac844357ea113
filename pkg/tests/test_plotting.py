from canrev.model import Action
from canrev.pipeline import AnalysisConfig, discover_controls, rate_of_change_correlation
from canrev.plotting import render_report_figures

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_figures_written(suite, tmp_path):
    drive = suite["stop-and-go"][0]
    cal = suite["calibration-steering"][0]
    cfg = AnalysisConfig(top_n=10)
    table = rate_of_change_correlation(drive, Action.STEER, cfg)
    found = discover_controls(table, cal, cfg.discovery)
    paths = render_report_figures(str(tmp_path), table, drive, cfg, cal, found, max_channels=2)
    names = sorted(p.rsplit("/", 1)[1] for p in paths)
    assert "steer_signal.png" in names and "steer_correlation.png" in names
    assert len(names) == 2 + min(2, len(found))
    for p in paths:
        with open(p, "rb") as fh:
            assert fh.read(8) == PNG_MAGIC
