import json

import numpy as np
import pytest

from gompertz_ssm.gibbs import PosteriorChain
from gompertz_ssm.harness import StudySummary
from gompertz_ssm.io import (
    SeriesFormatError,
    load_series_csv,
    read_chain_csv,
    write_acf_plot_data,
    write_chain_csv,
    write_coverage_plot_data,
    write_json,
    write_mse_plot_data,
    write_series_csv,
)


class TestSeriesCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "series.csv"
        counts = np.array([0, 3, 17, 2], dtype=np.int64)
        write_series_csv(path, counts, labels=["1972", "1973", "1974", "1975"])
        back, labels = load_series_csv(path)
        np.testing.assert_array_equal(back, counts)
        assert labels == ["1972", "1973", "1974", "1975"]

    def test_default_labels(self, tmp_path):
        path = tmp_path / "s.csv"
        write_series_csv(path, [5, 6])
        _, labels = load_series_csv(path)
        assert labels == ["1", "2"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(SeriesFormatError, match="no such file"):
            load_series_csv(tmp_path / "absent.csv")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("year,value\n1972,5\n")
        with pytest.raises(SeriesFormatError, match="header"):
            load_series_csv(path)

    def test_non_integer_count_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,count\na,5\nb,2.5\n")
        with pytest.raises(SeriesFormatError, match="line 3"):
            load_series_csv(path)

    def test_negative_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,count\na,5\nb,-1\n")
        with pytest.raises(SeriesFormatError, match="nonnegative"):
            load_series_csv(path)

    def test_too_short(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,count\na,5\n")
        with pytest.raises(SeriesFormatError, match="fewer than 2"):
            load_series_csv(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("label,count\na,5\n\nb,7\n")
        counts, _ = load_series_csv(path)
        np.testing.assert_array_equal(counts, [5, 7])


class TestChainCsv:
    def _chain(self, rng):
        draws = rng.normal(size=(20, 3))
        return PosteriorChain(draws=draws, iterations=20, burn_in=5, wall_time=0.1)

    def test_round_trip_bit_exact(self, tmp_path):
        chain = self._chain(np.random.default_rng(1))
        path = tmp_path / "chain.csv"
        write_chain_csv(path, chain)
        back = read_chain_csv(path)
        np.testing.assert_array_equal(back, chain.draws)

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("a,b,c,d\n1,2,3,4\n")
        with pytest.raises(ValueError, match="header"):
            read_chain_csv(path)

    def test_empty_chain(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("iteration,theta1,theta2,b\n")
        with pytest.raises(ValueError, match="empty"):
            read_chain_csv(path)


class TestJsonAndPlotData:
    def _summary(self):
        metrics = {
            "Gibbs": {
                "theta1": {"mse": 0.1, "coverage": 0.9, "se_p5": 0.01, "se_p95": 0.5}
            }
        }
        return StudySummary("S1", 10, metrics, {}, {}, {"Gibbs": 0})

    def test_write_json_stable(self, tmp_path):
        path = tmp_path / "out.json"
        write_json(path, {"b": 1, "a": [1.5, 2.5]})
        text1 = path.read_text()
        write_json(path, {"a": [1.5, 2.5], "b": 1})
        assert path.read_text() == text1
        assert json.loads(text1) == {"a": [1.5, 2.5], "b": 1}

    def test_mse_plot_data(self, tmp_path):
        path = tmp_path / "mse.csv"
        write_mse_plot_data(path, self._summary())
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "scenario,method,parameter,mean,p5,p95"
        assert lines[1].startswith("S1,Gibbs,theta1,")

    def test_coverage_plot_data(self, tmp_path):
        path = tmp_path / "cov.csv"
        write_coverage_plot_data(path, self._summary())
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "scenario,method,parameter,coverage"
        assert lines[1] == "S1,Gibbs,theta1,0.90000000000000002"

    def test_acf_plot_data(self, tmp_path):
        path = tmp_path / "acf.csv"
        write_acf_plot_data(path, {"b": np.array([1.0, 0.5])})
        lines = path.read_text().strip().splitlines()
        assert lines == ["parameter,lag,acf", "b,0,1", "b,1,0.5"]
